//! `gen-esn`: generate untrained networks.
//!
//! ```toml
//! seed = 1              # or seeds = [1, 2, 3]
//! reservoir_size = 800
//! leak_rate = 1.0
//! spectral_radius = 0.99
//! input_scaling = 0.1
//! bias_scaling = 0.1
//! n_inputs = 1
//! n_outputs = 1
//! name = "esn"          # files are <name>-s<seed>.json
//! ```

use esn_mor::io::save_esn;
use esn_mor::{Esn, HyperParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{check, CommandConfig};
use crate::error::{CliError, Result};
use crate::output::Run;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenEsnConfig {
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub reservoir_size: usize,
    pub leak_rate: f64,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub bias_scaling: f64,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub name: String,
}

impl Default for GenEsnConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: None,
            reservoir_size: 800,
            leak_rate: 1.0,
            spectral_radius: 0.99,
            input_scaling: 0.1,
            bias_scaling: 0.1,
            n_inputs: 1,
            n_outputs: 1,
            name: "esn".into(),
        }
    }
}

impl GenEsnConfig {
    pub fn hyper(&self, seed: u64) -> HyperParams {
        HyperParams {
            reservoir_size: self.reservoir_size,
            leak_rate: self.leak_rate,
            spectral_radius: self.spectral_radius,
            input_scaling: self.input_scaling,
            bias_scaling: self.bias_scaling,
            n_inputs: self.n_inputs,
            n_outputs: self.n_outputs,
            seed,
        }
    }
}

impl CommandConfig for GenEsnConfig {
    const NAME: &'static str = "gen-esn";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        if self.seeds.is_none() {
            self.seeds = Some(vec![self.seed]);
        }
        check(!self.seeds.as_ref().unwrap().is_empty(), || "seeds must not be empty".into())?;
        check(!self.name.is_empty(), || "name must not be empty".into())?;
        self.hyper(self.seed).validate()?;
        Ok(())
    }
}

pub fn file_name(name: &str, seed: u64) -> String {
    format!("{name}-s{seed}.json")
}

#[derive(Serialize)]
struct Summary {
    files: Vec<String>,
    hyper: HyperParams,
}

pub fn run(cfg: &GenEsnConfig, run: &Run) -> Result<()> {
    let seeds = cfg.seeds.clone().unwrap_or_default();
    let models: Vec<(u64, Esn)> = seeds
        .par_iter()
        .map(|&s| Ok((s, Esn::generate(&cfg.hyper(s))?)))
        .collect::<Result<_>>()?;
    let mut files = Vec::new();
    for (s, esn) in &models {
        let name = file_name(&cfg.name, *s);
        let p = run.path(&name)?;
        save_esn(&p, esn, Some(run.provenance(*s))).map_err(|e| CliError::io(&p, e))?;
        log::info!("wrote {}", p.display());
        files.push(name);
    }
    run.write_json(
        "gen-esn.json",
        cfg.seed,
        &Summary {
            files,
            hyper: cfg.hyper(cfg.seed),
        },
    )?;
    Ok(())
}
