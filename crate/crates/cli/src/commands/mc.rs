//! `mc`: memory capacity of full, POD and POD-DEIM networks.
//!
//! Either evaluates existing model files (`models = [...]`) or runs the grid
//! sizes × seeds × POD cutoffs × DEIM cutoffs, generating each network and
//! reducing it from its own white-noise run.
//!
//! ```toml
//! seed = 1                     # desk scale: seeds 1..=3; paper scale: 12 seeds
//! sizes = [400, 800, 1400]     # paper scale: 400, 600, ..., 2200
//! leak_rate = 1.0
//! spectral_radius = 0.99
//! input_scaling = 0.1
//! bias_scaling = 0.1
//! pod_cutoffs = [0.01, 0.05, 0.10]
//! deim_cutoffs = [0.01, 0.05]  # paper scale adds 0.10 and 0.20
//! n_mc = 100
//! washout = 200
//! lambda = 1e-6
//! length = 6000
//! signal_seed_offset = 1000    # the white noise uses seed + offset
//! # models = ["out/reduced.json"]
//! ```
//!
//! A reduced model that diverges is recorded with status `diverged` rather
//! than failing the run.

use std::path::PathBuf;

use esn_mor::io::load_model;
use esn_mor::io::LoadedModel;
use esn_mor::tasks::memory::memory_capacity;
use esn_mor::tasks::signals::{gen_signal, SignalSpec};
use esn_mor::tasks::input_row;
use esn_mor::{Basis, Deim, Esn, EsnError, HyperParams, McConfig, McResult, Pod, Reservoir};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{check, seed_grid, CommandConfig};
use crate::error::Result;
use crate::output::{model_id, Run};

pub const DESK_SEEDS: usize = 3;
pub const PAPER_SEEDS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McCommandConfig {
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub paper_scale: bool,
    pub models: Option<Vec<PathBuf>>,
    pub sizes: Option<Vec<usize>>,
    pub leak_rate: f64,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub bias_scaling: f64,
    pub pod_cutoffs: Option<Vec<f64>>,
    pub deim_cutoffs: Option<Vec<f64>>,
    pub n_mc: usize,
    pub washout: usize,
    pub lambda: f64,
    pub length: usize,
    pub signal_seed_offset: u64,
}

impl Default for McCommandConfig {
    fn default() -> Self {
        let mc = McConfig::default();
        Self {
            seed: 1,
            seeds: None,
            paper_scale: false,
            models: None,
            sizes: None,
            leak_rate: 1.0,
            spectral_radius: 0.99,
            input_scaling: 0.1,
            bias_scaling: 0.1,
            pod_cutoffs: None,
            deim_cutoffs: None,
            n_mc: mc.n_mc,
            washout: mc.washout,
            lambda: mc.lambda,
            length: mc.length,
            signal_seed_offset: 1000,
        }
    }
}

impl CommandConfig for McCommandConfig {
    const NAME: &'static str = "mc";
    const HAS_GRID: bool = true;

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        let paper = self.paper_scale;
        if self.seeds.is_none() {
            self.seeds = Some(seed_grid(self.seed, if paper { PAPER_SEEDS } else { DESK_SEEDS }));
        }
        if self.models.is_none() {
            self.sizes.get_or_insert_with(|| {
                if paper {
                    (2..=11).map(|i| i * 200).collect()
                } else {
                    vec![400, 800, 1400]
                }
            });
            self.pod_cutoffs.get_or_insert_with(|| vec![0.01, 0.05, 0.10]);
            self.deim_cutoffs.get_or_insert_with(|| {
                if paper {
                    vec![0.01, 0.05, 0.10, 0.20]
                } else {
                    vec![0.01, 0.05]
                }
            });
        }
        check(!self.seeds.as_ref().unwrap().is_empty(), || "seeds must not be empty".into())?;
        for c in self.pod_cutoffs.iter().chain(&self.deim_cutoffs).flatten() {
            check((0.0..1.0).contains(c), || format!("energy cutoffs must lie in [0, 1), got {c}"))?;
        }
        if let Some(s) = &self.sizes {
            check(!s.is_empty() && s.iter().all(|n| *n > 0), || "sizes must be positive".into())?;
            self.hyper(s[0], self.seed).validate()?;
        }
        check(self.n_mc >= 1 && self.lambda > 0.0, || "n_mc must be ≥ 1 and lambda > 0".into())?;
        check(self.length >= self.washout.max(self.n_mc) + 4, || {
            format!("length {} is too short for washout {} and n_mc {}", self.length, self.washout, self.n_mc)
        })
    }
}

impl McCommandConfig {
    fn hyper(&self, n: usize, seed: u64) -> HyperParams {
        HyperParams {
            reservoir_size: n,
            leak_rate: self.leak_rate,
            spectral_radius: self.spectral_radius,
            input_scaling: self.input_scaling,
            bias_scaling: self.bias_scaling,
            n_inputs: 1,
            n_outputs: 1,
            seed,
        }
    }

    fn mc_config(&self) -> McConfig {
        McConfig {
            n_mc: self.n_mc,
            washout: self.washout,
            lambda: self.lambda,
            length: self.length,
        }
    }

    fn signal(&self, seed: u64) -> Result<Vec<f64>> {
        Ok(gen_signal(&SignalSpec::white_noise(
            self.length,
            seed.wrapping_add(self.signal_seed_offset),
        ))?)
    }
}

/// One evaluated model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McRecord {
    pub model_id: String,
    pub seed: u64,
    pub size: usize,
    pub pod_cutoff: Option<f64>,
    pub deim_cutoff: Option<f64>,
    pub n_states: usize,
    pub n_tanh_nodes: usize,
    pub mc: Option<f64>,
    pub status: String,
    #[serde(skip)]
    pub r_n: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    mc: Option<f64>,
    n_mc: usize,
    model_id: &'a str,
    seed: u64,
    n_states: usize,
    n_tanh_nodes: usize,
    pod_cutoff: Option<f64>,
    deim_cutoff: Option<f64>,
    status: &'a str,
}

#[derive(Debug, Serialize)]
struct DelayRow {
    delay_n: usize,
    r_n: f64,
}

#[derive(Debug, Serialize)]
struct AggregateRow {
    size: usize,
    pod_cutoff: Option<f64>,
    deim_cutoff: Option<f64>,
    runs: usize,
    diverged: usize,
    mc_mean: Option<f64>,
    mc_std: Option<f64>,
    n_states_min: usize,
    n_states_max: usize,
    n_tanh_min: usize,
    n_tanh_max: usize,
}

/// Compact cutoff label: 0.05 → "5".
fn pct(c: f64) -> String {
    format!("{}", (c * 1e6).round() / 1e4)
}

fn record<M: Reservoir<f64> + ?Sized>(
    model: &M,
    id: String,
    seed: u64,
    size: usize,
    cutoffs: (Option<f64>, Option<f64>),
    eta: &[f64],
    cfg: &McConfig,
) -> Result<McRecord> {
    let res: std::result::Result<McResult, EsnError> = memory_capacity(model, eta, cfg);
    let (mc, r_n, status) = match res {
        Ok(r) => (Some(r.mc), r.r_n, "ok".to_string()),
        Err(EsnError::Diverged { step }) => {
            log::warn!("{id}: diverged at step {step}");
            (None, Vec::new(), format!("diverged at step {step}"))
        }
        Err(e) => return Err(e.into()),
    };
    Ok(McRecord {
        model_id: id,
        seed,
        size,
        pod_cutoff: cutoffs.0,
        deim_cutoff: cutoffs.1,
        n_states: model.state_dim(),
        n_tanh_nodes: model.tanh_nodes(),
        mc,
        status,
        r_n,
    })
}

fn grid_cell(cfg: &McCommandConfig, size: usize, seed: u64) -> Result<Vec<McRecord>> {
    let mc_cfg = cfg.mc_config();
    let esn = Esn::generate(&cfg.hyper(size, seed))?;
    let eta = cfg.signal(seed)?;
    let base = format!("n{size}-s{seed}");
    let mut out = vec![record(&esn, format!("{base}-full"), seed, size, (None, None), &eta, &mc_cfg)?];

    // training half of the usable steps, as scored by memory_capacity
    let states = esn.run_states(&input_row(&eta), &esn.zero_state())?;
    let start = mc_cfg.washout.max(mc_cfg.n_mc);
    let mid = start + (mc_cfg.length - start) / 2;
    let basis = Basis::from_snapshots(&states.columns_range(start..mid).into_owned())?;
    drop(states);

    for &pc in cfg.pod_cutoffs.as_deref().unwrap_or_default() {
        let pe = Pod::from_cutoff(&esn, &basis, pc)?;
        let pid = format!("{base}-pod{}", pct(pc));
        out.push(record(&pe, pid.clone(), seed, size, (Some(pc), None), &eta, &mc_cfg)?);
        for &dc in cfg.deim_cutoffs.as_deref().unwrap_or_default() {
            let de = Deim::build(&pe, &basis, dc)?;
            let id = format!("{pid}-deim{}", pct(dc));
            out.push(record(&de, id, seed, size, (Some(pc), Some(dc)), &eta, &mc_cfg)?);
        }
    }
    Ok(out)
}

fn model_cell(cfg: &McCommandConfig, path: &PathBuf, seed: u64) -> Result<McRecord> {
    let eta = cfg.signal(seed)?;
    let mc_cfg = cfg.mc_config();
    let id = format!("{}-s{seed}", model_id(path));
    let loaded = load_model::<f64>(path)?;
    let size = loaded.full().state_dim();
    match &loaded {
        LoadedModel::Full(e) => record(e, id, seed, size, (None, None), &eta, &mc_cfg),
        LoadedModel::Pod(_, p) => {
            let c = p.energy_kept().map(|e| 1.0 - e);
            record(p, id, seed, size, (c, None), &eta, &mc_cfg)
        }
        LoadedModel::Deim(_, d) => {
            let c = d.base().energy_kept().map(|e| 1.0 - e);
            record(d, id, seed, size, (c, d.deim_cutoff()), &eta, &mc_cfg)
        }
    }
}

fn aggregate(records: &[McRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
    for r in records {
        let k = (r.size, r.pod_cutoff, r.deim_cutoff);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(size, pc, dc)| {
            let group: Vec<&McRecord> = records
                .iter()
                .filter(|r| (r.size, r.pod_cutoff, r.deim_cutoff) == (size, pc, dc))
                .collect();
            let vals: Vec<f64> = group.iter().filter_map(|r| r.mc).collect();
            let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
            let std = mean.map(|m| {
                if vals.len() < 2 {
                    0.0
                } else {
                    (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt()
                }
            });
            AggregateRow {
                size,
                pod_cutoff: pc,
                deim_cutoff: dc,
                runs: group.len(),
                diverged: group.len() - vals.len(),
                mc_mean: mean,
                mc_std: std,
                n_states_min: group.iter().map(|r| r.n_states).min().unwrap_or(0),
                n_states_max: group.iter().map(|r| r.n_states).max().unwrap_or(0),
                n_tanh_min: group.iter().map(|r| r.n_tanh_nodes).min().unwrap_or(0),
                n_tanh_max: group.iter().map(|r| r.n_tanh_nodes).max().unwrap_or(0),
            }
        })
        .collect()
}

pub fn run(cfg: &McCommandConfig, run: &Run) -> Result<()> {
    let seeds = cfg.seeds.clone().unwrap_or_default();
    let records: Vec<McRecord> = match &cfg.models {
        Some(models) => {
            let cells: Vec<(&PathBuf, u64)> = models.iter().flat_map(|m| seeds.iter().map(move |&s| (m, s))).collect();
            cells
                .par_iter()
                .map(|(m, s)| model_cell(cfg, m, *s))
                .collect::<Result<_>>()?
        }
        None => {
            let sizes = cfg.sizes.clone().unwrap_or_default();
            let cells: Vec<(usize, u64)> = sizes.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
            let nested: Vec<Vec<McRecord>> = cells
                .par_iter()
                .map(|&(n, s)| grid_cell(cfg, n, s))
                .collect::<Result<_>>()?;
            nested.into_iter().flatten().collect()
        }
    };

    for r in &records {
        if !r.r_n.is_empty() {
            let rows = r.r_n.iter().enumerate().map(|(i, &v)| DelayRow { delay_n: i + 1, r_n: v });
            run.write_csv(&format!("mc/{}.csv", r.model_id), r.seed, rows)?;
        }
        run.write_json(
            &format!("mc/{}.json", r.model_id),
            r.seed,
            &Summary {
                mc: r.mc,
                n_mc: cfg.n_mc,
                model_id: &r.model_id,
                seed: r.seed,
                n_states: r.n_states,
                n_tanh_nodes: r.n_tanh_nodes,
                pod_cutoff: r.pod_cutoff,
                deim_cutoff: r.deim_cutoff,
                status: &r.status,
            },
        )?;
    }
    run.write_csv("mc-summary.csv", cfg.seed, &records)?;
    run.write_csv("mc-aggregate.csv", cfg.seed, aggregate(&records))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_labels_are_compact() {
        assert_eq!(pct(0.05), "5");
        assert_eq!(pct(0.1), "10");
        assert_eq!(pct(0.005), "0.5");
    }

    #[test]
    fn desk_and_paper_grids() {
        let mut c = McCommandConfig::default();
        c.resolve().unwrap();
        assert_eq!(c.seeds.as_ref().unwrap().len(), DESK_SEEDS);
        assert_eq!(c.sizes.as_ref().unwrap().len(), 3);
        let mut p = McCommandConfig {
            paper_scale: true,
            ..Default::default()
        };
        p.resolve().unwrap();
        assert_eq!(p.seeds.as_ref().unwrap().len(), PAPER_SEEDS);
        assert_eq!(p.sizes.as_ref().unwrap(), &(2..=11).map(|i| i * 200).collect::<Vec<_>>());
        let again = p.clone();
        p.resolve().unwrap();
        assert_eq!(p, again);
    }
}
