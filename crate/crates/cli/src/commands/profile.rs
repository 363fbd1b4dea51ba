//! `svd-profile`: singular-value energy profiles of reservoir trajectories
//! under different driving signals.
//!
//! ```toml
//! seed = 1                  # desk scale: seeds 1..=5; paper scale: 20 seeds
//! reservoir_size = 500
//! leak_rate = 1.0
//! spectral_radius = 0.99
//! input_scaling = 0.1
//! bias_scaling = 0.1
//! length = 10000
//! washout = 0
//! signal_seed_offset = 50   # signal seed = seed + offset; the network uses seed
//! top_k = 10
//!
//! [[signals]]
//! name = "white_noise"
//! kind = "white_noise"
//! mean = 0.0
//! std = 1.0
//!
//! [[signals]]
//! name = "aprbs1000"
//! kind = "aprbs"
//! min_period = 1000
//! lo = -1.0
//! hi = 1.0
//! ```
//!
//! Every (signal, seed) pair drives the same network for that seed.

use esn_mor::tasks::profile::energy_profile;
use esn_mor::{HyperParams, SignalKind, SignalSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{check, seed_grid, CommandConfig};
use crate::error::Result;
use crate::output::Run;

pub const DESK_SEEDS: usize = 5;
pub const PAPER_SEEDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEntry {
    pub name: String,
    #[serde(flatten)]
    pub kind: SignalKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileConfig {
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub paper_scale: bool,
    pub reservoir_size: usize,
    pub leak_rate: f64,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub bias_scaling: f64,
    pub length: usize,
    pub washout: usize,
    pub signal_seed_offset: u64,
    pub top_k: usize,
    pub signals: Vec<SignalEntry>,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: None,
            paper_scale: false,
            reservoir_size: 500,
            leak_rate: 1.0,
            spectral_radius: 0.99,
            input_scaling: 0.1,
            bias_scaling: 0.1,
            length: 10_000,
            washout: 0,
            signal_seed_offset: 50,
            top_k: 10,
            signals: vec![
                SignalEntry {
                    name: "white_noise".into(),
                    kind: SignalKind::WhiteNoise { mean: 0.0, std: 1.0 },
                },
                SignalEntry {
                    name: "aprbs1000".into(),
                    kind: SignalKind::Aprbs {
                        min_period: 1000,
                        lo: -1.0,
                        hi: 1.0,
                    },
                },
            ],
        }
    }
}

impl ProfileConfig {
    fn hyper(&self, seed: u64) -> HyperParams {
        HyperParams {
            reservoir_size: self.reservoir_size,
            leak_rate: self.leak_rate,
            spectral_radius: self.spectral_radius,
            input_scaling: self.input_scaling,
            bias_scaling: self.bias_scaling,
            n_inputs: 1,
            n_outputs: 1,
            seed,
        }
    }

    fn spec(&self, entry: &SignalEntry, seed: u64) -> SignalSpec {
        SignalSpec {
            kind: entry.kind.clone(),
            length: self.length,
            seed: seed.wrapping_add(self.signal_seed_offset),
        }
    }
}

impl CommandConfig for ProfileConfig {
    const NAME: &'static str = "svd-profile";
    const HAS_GRID: bool = true;

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        if self.seeds.is_none() {
            self.seeds = Some(seed_grid(self.seed, if self.paper_scale { PAPER_SEEDS } else { DESK_SEEDS }));
        }
        self.hyper(self.seed).validate()?;
        check(!self.seeds.as_ref().unwrap().is_empty(), || "seeds must not be empty".into())?;
        check(!self.signals.is_empty(), || "at least one signal is required".into())?;
        check(self.washout < self.length, || "washout must be shorter than the signal".into())?;
        check(self.top_k >= 1, || "top_k must be at least 1".into())?;
        for (i, s) in self.signals.iter().enumerate() {
            check(!self.signals[..i].iter().any(|o| o.name == s.name), || format!("duplicate signal name `{}`", s.name))?;
            self.spec(s, self.seed).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileRow {
    pub signal: String,
    pub seed: u64,
    pub j: usize,
    pub sigma_j: f64,
    pub epsilon_j: f64,
}

#[derive(Debug, Serialize)]
struct SignalSummary {
    signal: String,
    mean_top1_energy: f64,
    mean_top_k_energy: f64,
    per_seed_top1: Vec<f64>,
    per_seed_top_k: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    top_k: usize,
    seeds: Vec<u64>,
    signals: Vec<SignalSummary>,
}

pub fn run(cfg: &ProfileConfig, run: &Run) -> Result<()> {
    let seeds = cfg.seeds.clone().unwrap_or_default();
    let cells: Vec<(&SignalEntry, u64)> = cfg.signals.iter().flat_map(|s| seeds.iter().map(move |&k| (s, k))).collect();
    let profiles = cells
        .par_iter()
        .map(|&(s, seed)| Ok(energy_profile(&cfg.hyper(seed), &cfg.spec(s, seed), cfg.washout)?))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for ((s, seed), p) in cells.iter().zip(&profiles) {
        for (j, (&sigma, &eps)) in p.sigma.iter().zip(&p.energy).enumerate() {
            rows.push(ProfileRow {
                signal: s.name.clone(),
                seed: *seed,
                j: j + 1,
                sigma_j: sigma,
                epsilon_j: eps,
            });
        }
    }
    run.write_csv("svd-profile.csv", cfg.seed, &rows)?;

    let signals = cfg
        .signals
        .iter()
        .map(|s| {
            let mine: Vec<_> = cells.iter().zip(&profiles).filter(|((e, _), _)| e.name == s.name).collect();
            let top1: Vec<f64> = mine.iter().map(|(_, p)| p.top_energy(1)).collect();
            let topk: Vec<f64> = mine.iter().map(|(_, p)| p.top_energy(cfg.top_k)).collect();
            SignalSummary {
                signal: s.name.clone(),
                mean_top1_energy: top1.iter().sum::<f64>() / top1.len() as f64,
                mean_top_k_energy: topk.iter().sum::<f64>() / topk.len() as f64,
                per_seed_top1: top1,
                per_seed_top_k: topk,
            }
        })
        .collect();
    run.write_json(
        "svd-profile-summary.json",
        cfg.seed,
        &Summary {
            top_k: cfg.top_k,
            seeds,
            signals,
        },
    )?;
    Ok(())
}
