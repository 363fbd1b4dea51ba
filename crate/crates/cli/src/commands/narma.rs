//! `narma-bench`: NARMA10 test R² of a large trained network, its POD
//! reductions, and freshly trained networks of the reduced sizes.
//!
//! ```toml
//! seed = 1                  # desk scale: seeds 1..=3; paper scale: 12 seeds
//! reservoir_size = 1400
//! leak_rate = 0.7
//! spectral_radius = 0.99
//! input_scaling = 0.1
//! bias_scaling = 0.1
//! pod_sizes = [10, 30, 66]  # paper scale: 3, 6, 7, ..., 375
//! fresh = true              # also train N = m networks
//! length = 5000
//! washout = 200
//! data_seed_offset = 1000   # NARMA input seed = seed + offset
//! fresh_seed_offset = 10000 # fresh network seed = offset + 10000·seed + m
//! # lambda = 1e-9           # fixes λ; default searches lambda_grid
//! ```
//!
//! Snapshots are the training-split states after washout; reduced models use
//! the projected full readout.

use esn_mor::tasks::narma::{narma_dataset, NARMA_FIT, NARMA_LENGTH, NARMA_TRAIN};
use esn_mor::training::{default_lambda_grid, evaluate_r2, train_readout, DEFAULT_WASHOUT};
use esn_mor::{Basis, Esn, HyperParams, Pod, Regularization, Reservoir};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{check, seed_grid, CommandConfig};
use crate::error::Result;
use crate::output::Run;

pub const DESK_SIZES: [usize; 3] = [10, 30, 66];
pub const PAPER_SIZES: [usize; 20] = [3, 6, 7, 8, 9, 10, 11, 13, 17, 30, 66, 73, 82, 92, 106, 123, 149, 186, 248, 375];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NarmaConfig {
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub paper_scale: bool,
    pub reservoir_size: usize,
    pub leak_rate: f64,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub bias_scaling: f64,
    pub pod_sizes: Option<Vec<usize>>,
    pub fresh: bool,
    pub length: usize,
    pub washout: usize,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub data_seed_offset: u64,
    pub fresh_seed_offset: u64,
}

impl Default for NarmaConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: None,
            paper_scale: false,
            reservoir_size: 1400,
            leak_rate: 0.7,
            spectral_radius: 0.99,
            input_scaling: 0.1,
            bias_scaling: 0.1,
            pod_sizes: None,
            fresh: true,
            length: NARMA_LENGTH,
            washout: DEFAULT_WASHOUT,
            lambda: None,
            lambda_grid: None,
            data_seed_offset: 1000,
            fresh_seed_offset: 10_000,
        }
    }
}

impl CommandConfig for NarmaConfig {
    const NAME: &'static str = "narma-bench";
    const HAS_GRID: bool = true;

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        let paper = self.paper_scale;
        if self.seeds.is_none() {
            self.seeds = Some(seed_grid(self.seed, if paper { super::mc::PAPER_SEEDS } else { super::mc::DESK_SEEDS }));
        }
        self.pod_sizes
            .get_or_insert_with(|| if paper { PAPER_SIZES.to_vec() } else { DESK_SIZES.to_vec() });
        if self.lambda.is_none() && self.lambda_grid.is_none() {
            self.lambda_grid = Some(default_lambda_grid());
        }
        self.hyper(self.reservoir_size, self.seed).validate()?;
        check(!self.seeds.as_ref().unwrap().is_empty(), || "seeds must not be empty".into())?;
        let sizes = self.pod_sizes.as_ref().unwrap();
        check(sizes.iter().all(|&m| m >= 1 && m <= self.reservoir_size), || {
            format!("pod_sizes must lie in 1..={}", self.reservoir_size)
        })?;
        check(self.length > NARMA_TRAIN && self.washout < NARMA_FIT, || {
            format!("length must exceed {NARMA_TRAIN} and washout stay below {NARMA_FIT}")
        })
    }
}

impl NarmaConfig {
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

    fn regularization(&self) -> Regularization {
        match self.lambda {
            Some(l) => Regularization::Fixed(l),
            None => Regularization::Validate(self.lambda_grid.clone().unwrap_or_else(default_lambda_grid)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NarmaRow {
    pub seed: u64,
    pub model: String,
    pub m: usize,
    pub test_r2: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SizeSummary {
    m: usize,
    pod_mean_r2: Option<f64>,
    fresh_mean_r2: Option<f64>,
    /// Seeds where POD scored at least the fresh network.
    pod_wins: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    seeds: Vec<u64>,
    full_mean_r2: Option<f64>,
    sizes: Vec<SizeSummary>,
}

fn cell(cfg: &NarmaConfig, seed: u64) -> Result<Vec<NarmaRow>> {
    let data = narma_dataset::<f64>(cfg.length, seed.wrapping_add(cfg.data_seed_offset), NARMA_FIT, NARMA_TRAIN)?;
    let reg = cfg.regularization();
    let esn = Esn::generate(&cfg.hyper(cfg.reservoir_size, seed))?;
    let (trained, fit) = train_readout(&esn, &data, cfg.washout, &reg)?;
    let mut rows = vec![NarmaRow {
        seed,
        model: "full".into(),
        m: cfg.reservoir_size,
        test_r2: fit.test_r2[0],
        lambda: Some(fit.lambda),
    }];
    let states = trained.run_states(&data.inputs, &trained.zero_state())?;
    let basis = Basis::from_snapshots(&states.columns_range(cfg.washout..data.val_end).into_owned())?;
    drop(states);
    let test = data.val_end..data.len();
    for &m in cfg.pod_sizes.as_deref().unwrap_or_default() {
        let m_eff = m.min(basis.rank_bound());
        let pe = Pod::from_rank(&trained, &basis, m_eff)?;
        let r2 = evaluate_r2(&pe, &data, &pe.zero_state(), test.clone())?;
        rows.push(NarmaRow {
            seed,
            model: "pod".into(),
            m: m_eff,
            test_r2: r2[0],
            lambda: None,
        });
        if cfg.fresh {
            let fs = cfg.fresh_seed_offset.wrapping_add(seed.wrapping_mul(10_000)).wrapping_add(m as u64);
            let small = Esn::generate(&cfg.hyper(m, fs))?;
            let (_, f) = train_readout(&small, &data, cfg.washout, &reg)?;
            rows.push(NarmaRow {
                seed,
                model: "fresh".into(),
                m,
                test_r2: f.test_r2[0],
                lambda: Some(f.lambda),
            });
        }
    }
    Ok(rows)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = v.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(seeds: &[u64], sizes: &[usize], rows: &[NarmaRow]) -> Summary {
    fn pick<'a>(
        rows: &'a [NarmaRow],
        model: &'a str,
        m: Option<usize>,
        seed: Option<u64>,
    ) -> impl Iterator<Item = f64> + 'a {
        rows.iter()
            .filter(move |r| r.model == model && m.map_or(true, |m| r.m == m) && seed.map_or(true, |s| r.seed == s))
            .filter_map(|r| r.test_r2)
    }
    Summary {
        seeds: seeds.to_vec(),
        full_mean_r2: mean(pick(rows, "full", None, None)),
        sizes: sizes
            .iter()
            .map(|&m| SizeSummary {
                m,
                pod_mean_r2: mean(pick(rows, "pod", Some(m), None)),
                fresh_mean_r2: mean(pick(rows, "fresh", Some(m), None)),
                pod_wins: seeds
                    .iter()
                    .filter(|&&s| {
                        match (pick(rows, "pod", Some(m), Some(s)).next(), pick(rows, "fresh", Some(m), Some(s)).next()) {
                            (Some(p), Some(f)) => p >= f,
                            _ => false,
                        }
                    })
                    .count(),
            })
            .collect(),
    }
}

pub fn run(cfg: &NarmaConfig, run: &Run) -> Result<()> {
    let seeds = cfg.seeds.clone().unwrap_or_default();
    let nested: Vec<Vec<NarmaRow>> = seeds.par_iter().map(|&s| cell(cfg, s)).collect::<Result<_>>()?;
    let rows: Vec<NarmaRow> = nested.into_iter().flatten().collect();
    for r in rows.iter().filter(|r| r.model == "full") {
        log::info!("seed {}: full test R² {:?}", r.seed, r.test_r2);
    }
    run.write_csv("narma-bench.csv", cfg.seed, &rows)?;
    let sizes = cfg.pod_sizes.clone().unwrap_or_default();
    run.write_json("narma-summary.json", cfg.seed, &summarize(&seeds, &sizes, &rows))?;
    Ok(())
}
