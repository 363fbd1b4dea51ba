//! Output directory bookkeeping: stamped result files and the run manifest.
//!
//! JSON results carry a `provenance` object; CSV results start with one
//! `#`-comment line holding the same three fields.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use esn_mor::io::{save_exact, Provenance};
use serde::Serialize;

use crate::config::{CommandConfig, Loaded};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.toml";

pub struct Run {
    out: PathBuf,
    hash: String,
    seed: u64,
    outputs: Mutex<Vec<String>>,
}

#[derive(Serialize)]
struct Stamped<'a, S: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a S,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    toolkit_version: &'a str,
    seed: u64,
    config_hash: &'a str,
    out: String,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    outputs: Vec<String>,
    config: &'a C,
}

impl Run {
    pub fn new<C: CommandConfig>(loaded: &Loaded<C>) -> Result<Self> {
        std::fs::create_dir_all(&loaded.out).map_err(|e| CliError::io(&loaded.out, e))?;
        Ok(Self {
            out: loaded.out.clone(),
            hash: loaded.hash.clone(),
            seed: loaded.config.seed(),
            outputs: Mutex::new(Vec::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.out
    }

    pub fn provenance(&self, seed: u64) -> Provenance {
        Provenance::new(seed, self.hash.clone())
    }

    /// Registers `name` as an output and returns its full path, creating
    /// parent directories.
    pub fn path(&self, name: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let mut outs = self.outputs.lock().expect("output list poisoned");
        if !outs.iter().any(|o| o == name) {
            outs.push(name.to_string());
        }
        Ok(p)
    }

    /// Writes `{provenance, ..body}` with exact float formatting.
    pub fn write_json<S: Serialize>(&self, name: &str, seed: u64, body: &S) -> Result<PathBuf> {
        let p = self.path(name)?;
        let prov = self.provenance(seed);
        save_exact(&p, &Stamped { provenance: &prov, body }).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    /// Writes rows (serialized with headers) under a provenance comment line.
    pub fn write_csv<R: Serialize>(&self, name: &str, seed: u64, rows: impl IntoIterator<Item = R>) -> Result<PathBuf> {
        let p = self.path(name)?;
        let prov = self.provenance(seed);
        let write = || -> std::io::Result<()> {
            let mut f = BufWriter::new(File::create(&p)?);
            writeln!(
                f,
                "# toolkit_version={} seed={} config_hash={}",
                prov.toolkit_version, prov.seed, prov.config_hash
            )?;
            let mut w = csv::Writer::from_writer(f);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()
        };
        write().map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    /// Writes `manifest.toml`; the `[config]` table is the fully resolved
    /// config, so the manifest can be passed back as `--config`.
    pub fn finish<C: CommandConfig>(&self, config: &C, outcome: &Result<()>) -> Result<()> {
        let outputs = self.outputs.lock().expect("output list poisoned").clone();
        let m = Manifest {
            command: C::NAME,
            toolkit_version: esn_mor::TOOLKIT_VERSION,
            seed: self.seed,
            config_hash: &self.hash,
            out: self.out.display().to_string(),
            status: if outcome.is_ok() { "ok" } else { "failed" },
            error: outcome.as_ref().err().map(|e| e.to_string()),
            outputs,
            config,
        };
        let text = toml::to_string(&m).map_err(|e| CliError::Config(format!("cannot serialize manifest: {e}")))?;
        let p = self.out.join(MANIFEST);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }
}

/// File stem used as a model id.
pub fn model_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}
