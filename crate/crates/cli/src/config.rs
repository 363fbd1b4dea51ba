//! TOML config loading, flag overrides and the config hash.
//!
//! Each subcommand has its own flat schema (see the `commands` modules). A
//! manifest written by an earlier run is also a valid config: its `[config]`
//! table is used and its `command` must match.

use std::path::{Path, PathBuf};

use esn_mor::tasks::narma::{narma_dataset, NARMA_FIT, NARMA_LENGTH, NARMA_TRAIN};
use esn_mor::tasks::signals::{gen_signal, SignalKind, SignalSpec};
use esn_mor::tasks::input_row;
use esn_mor::training::Dataset;
use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Flag values that take precedence over file keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paper_scale: bool,
}

pub trait CommandConfig: Serialize + DeserializeOwned {
    const NAME: &'static str;
    /// Whether `--paper-scale` changes anything for this command.
    const HAS_GRID: bool = false;

    /// Seed recorded in the provenance of every output.
    fn seed(&self) -> u64;

    /// Fills unset keys with their (desk- or paper-scale) defaults and checks
    /// the result. Must be idempotent so a manifest resolves to itself.
    fn resolve(&mut self) -> Result<()>;
}

#[derive(Debug, Clone)]
pub struct Loaded<C> {
    pub config: C,
    pub out: PathBuf,
    pub hash: String,
}

pub const DEFAULT_OUT: &str = "out";

pub fn load<C: CommandConfig>(path: &Path, ov: &Overrides) -> Result<Loaded<C>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_str(&text, ov)
}

pub fn load_str<C: CommandConfig>(text: &str, ov: &Overrides) -> Result<Loaded<C>> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    let mut out = take_string(&mut table, "out")?;

    if let Some(cmd) = table.get("command") {
        let cmd = cmd.as_str().unwrap_or_default().to_string();
        if cmd != C::NAME {
            return Err(CliError::Config(format!("manifest is for `{cmd}`, not `{}`", C::NAME)));
        }
        table = match table.remove("config") {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(CliError::Config("manifest has no [config] table".into())),
        };
    }

    if let Some(seed) = ov.seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Config(format!("seed {seed} exceeds the TOML integer range")))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
        table.remove("seeds");
    }
    if ov.paper_scale {
        if C::HAS_GRID {
            table.insert("paper_scale".into(), toml::Value::Boolean(true));
        } else {
            log::warn!("--paper-scale has no effect on `{}`", C::NAME);
        }
    }
    if let Some(o) = &ov.out {
        out = Some(o.display().to_string());
    }

    let mut config: C = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    config.resolve()?;
    let hash = config_hash::<C>(&config)?;
    Ok(Loaded {
        config,
        out: PathBuf::from(out.unwrap_or_else(|| DEFAULT_OUT.into())),
        hash,
    })
}

fn take_string(table: &mut toml::Table, key: &str) -> Result<Option<String>> {
    match table.remove(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(CliError::Config(format!("`{key}` must be a string, got {}", other.type_str()))),
    }
}

/// SHA-256 over the command name and the resolved config. The output
/// directory is not part of the hash.
pub fn config_hash<C: CommandConfig>(config: &C) -> Result<String> {
    let json = serde_json::to_string(config).map_err(|e| CliError::Config(e.to_string()))?;
    let mut h = Sha256::new();
    h.update(C::NAME.as_bytes());
    h.update(b"\n");
    h.update(json.as_bytes());
    Ok(hex::encode(h.finalize()))
}

pub fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

/// First `count` seeds starting at `base`.
pub fn seed_grid(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

fn default_narma_length() -> usize {
    NARMA_LENGTH
}

fn default_std() -> f64 {
    1.0
}

/// Where a driving input sequence comes from. Generated signals use the
/// command's seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    /// The NARMA10 input (uniform in `[0, 0.05]`) and its response.
    Narma10 {
        #[serde(default = "default_narma_length")]
        length: usize,
    },
    /// A dataset CSV with `in:<name>` / `out:<name>` columns.
    Csv { path: PathBuf },
    WhiteNoise {
        #[serde(default)]
        mean: f64,
        #[serde(default = "default_std")]
        std: f64,
        length: usize,
    },
    Uniform { lo: f64, hi: f64, length: usize },
    Aprbs { min_period: usize, lo: f64, hi: f64, length: usize },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Narma10 { length: NARMA_LENGTH }
    }
}

/// Inputs as an `n_inputs × K` matrix.
#[derive(Debug, Clone)]
pub struct InputData {
    pub inputs: DMatrix<f64>,
}

impl InputSource {
    pub fn signal_spec(&self, seed: u64) -> Option<SignalSpec> {
        let (kind, length) = match *self {
            InputSource::WhiteNoise { mean, std, length } => (SignalKind::WhiteNoise { mean, std }, length),
            InputSource::Uniform { lo, hi, length } => (SignalKind::Uniform { lo, hi }, length),
            InputSource::Aprbs {
                min_period,
                lo,
                hi,
                length,
            } => (SignalKind::Aprbs { min_period, lo, hi }, length),
            _ => return None,
        };
        Some(SignalSpec { kind, length, seed })
    }

    pub fn load(&self, seed: u64) -> Result<InputData> {
        match self {
            InputSource::Narma10 { length } => {
                let d = narma_dataset::<f64>(*length, seed, (*length).min(NARMA_FIT), (*length).min(NARMA_TRAIN))?;
                Ok(InputData { inputs: d.inputs })
            }
            InputSource::Csv { path } => {
                let d = Dataset::<f64>::load_csv(path, 1, 1)?;
                Ok(InputData { inputs: d.inputs })
            }
            _ => {
                let spec = self.signal_spec(seed).expect("signal variant");
                Ok(InputData {
                    inputs: input_row(&gen_signal(&spec)?),
                })
            }
        }
    }

    /// Steps that belong to training, when the source defines a split.
    pub fn train_end(&self) -> Option<usize> {
        match self {
            InputSource::Narma10 { length } => Some((*length).min(NARMA_TRAIN)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Toy {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        seeds: Option<Vec<u64>>,
        #[serde(default)]
        paper_scale: bool,
        #[serde(default)]
        size: usize,
    }

    impl CommandConfig for Toy {
        const NAME: &'static str = "toy";
        const HAS_GRID: bool = true;
        fn seed(&self) -> u64 {
            self.seed
        }
        fn resolve(&mut self) -> Result<()> {
            if self.seeds.is_none() {
                self.seeds = Some(seed_grid(self.seed, if self.paper_scale { 12 } else { 3 }));
            }
            Ok(())
        }
    }

    #[test]
    fn flags_override_file_keys() {
        let text = "seed = 4\nseeds = [9]\nsize = 7\nout = \"a\"\n";
        let l: Loaded<Toy> = load_str(text, &Overrides::default()).unwrap();
        assert_eq!(l.config.seeds, Some(vec![9]));
        assert_eq!(l.out, PathBuf::from("a"));

        let ov = Overrides {
            out: Some("b".into()),
            seed: Some(10),
            paper_scale: true,
        };
        let l: Loaded<Toy> = load_str(text, &ov).unwrap();
        assert_eq!(l.config.seed, 10);
        assert_eq!(l.config.seeds.as_ref().unwrap().len(), 12);
        assert_eq!(l.out, PathBuf::from("b"));
    }

    #[test]
    fn unknown_keys_and_bad_types_are_config_errors() {
        assert!(matches!(load_str::<Toy>("sise = 3", &Overrides::default()), Err(CliError::Config(_))));
        assert!(matches!(load_str::<Toy>("size = \"x\"", &Overrides::default()), Err(CliError::Config(_))));
        assert!(matches!(load_str::<Toy>("out = 3", &Overrides::default()), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_output_dir_and_tracks_content() {
        let a: Loaded<Toy> = load_str("size = 1\nout = \"x\"", &Overrides::default()).unwrap();
        let b: Loaded<Toy> = load_str("size = 1\nout = \"y\"", &Overrides::default()).unwrap();
        let c: Loaded<Toy> = load_str("size = 2", &Overrides::default()).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn manifest_tables_are_accepted_for_the_right_command() {
        let m = "command = \"toy\"\nconfig_hash = \"h\"\n[config]\nseed = 5\nsize = 2\n";
        let l: Loaded<Toy> = load_str(m, &Overrides::default()).unwrap();
        assert_eq!(l.config.seed, 5);
        let wrong = "command = \"other\"\n[config]\nseed = 5\n";
        assert!(load_str::<Toy>(wrong, &Overrides::default()).is_err());
    }

    #[test]
    fn input_sources_parse_and_generate() {
        let src: InputSource = toml::from_str("kind = \"aprbs\"\nmin_period = 5\nlo = -1.0\nhi = 1.0\nlength = 50").unwrap();
        let d = src.load(3).unwrap();
        assert_eq!(d.inputs.shape(), (1, 50));
        let n = InputSource::Narma10 { length: 300 }.load(1).unwrap();
        assert_eq!(n.inputs.shape(), (1, 300));
        assert!(n.inputs.iter().all(|v| (0.0..=0.05).contains(v)));
        assert!(toml::from_str::<InputSource>("kind = \"uniform\"\nlo = 0.0\nhi = 1.0\nlength = 5\nextra = 1").is_err());
    }
}
