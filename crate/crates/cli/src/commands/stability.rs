//! `stability`: Jacobian spectral radii of full, POD and DEIM models at
//! states visited by the full network.
//!
//! ```toml
//! models = ["out/pod.json", "out/deim.json"]  # any kind; reduced files embed their full network
//! seed = 1            # seeds the driving input and the point sampling
//! n_points = 10
//! washout = 200       # points are drawn from steps after the washout
//!
//! [input]             # defaults to uniform noise in [-1, 1], 2000 steps
//! kind = "uniform"
//! lo = -1.0
//! hi = 1.0
//! length = 2000
//! ```
//!
//! Each point is the state `x[k]` before step `k` together with `u[k]`;
//! reduced models are evaluated at `z = Tᵀx`.

use std::path::PathBuf;

use esn_mor::io::{load_model, LoadedModel};
use esn_mor::stability::stability_sweep;
use esn_mor::{Esn, Reservoir, StabilityReport};
use nalgebra::DVector;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{check, CommandConfig, InputSource};
use crate::error::{CliError, Result};
use crate::output::{model_id, Run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub seed: u64,
    pub models: Vec<PathBuf>,
    pub n_points: usize,
    pub washout: usize,
    pub input: InputSource,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            models: Vec::new(),
            n_points: 10,
            washout: esn_mor::training::DEFAULT_WASHOUT,
            input: InputSource::Uniform {
                lo: -1.0,
                hi: 1.0,
                length: 2000,
            },
        }
    }
}

impl CommandConfig for StabilityConfig {
    const NAME: &'static str = "stability";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        check(!self.models.is_empty(), || "`models` must list at least one model file".into())?;
        check(self.n_points >= 1, || "n_points must be at least 1".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRow {
    pub model_id: String,
    pub step: usize,
    #[serde(flatten)]
    pub report: StabilityReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvRow {
    pub model_id: String,
    pub point_id: usize,
    pub step: usize,
    pub rho_full: f64,
    pub rho_pod: Option<f64>,
    pub rho_deim: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    model_id: String,
    max_rho_full: f64,
    max_rho_pod: Option<f64>,
    max_rho_deim: Option<f64>,
    /// Points where `rho_pod > rho_full + 1e-8`.
    pod_exceeds_full: usize,
    /// Points where the DEIM Jacobian has `rho_deim ≥ 1`.
    deim_unstable: usize,
}

#[derive(Serialize)]
struct Output<'a> {
    steps: &'a [usize],
    records: &'a [StabilityRow],
    models: Vec<ModelSummary>,
}

fn max_opt(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    v.flatten().fold(None, |a: Option<f64>, b| Some(a.map_or(b, |a| a.max(b))))
}

pub fn run(cfg: &StabilityConfig, run: &Run) -> Result<()> {
    let models: Vec<(String, LoadedModel<f64>)> = cfg
        .models
        .iter()
        .map(|p| Ok((model_id(p), load_model::<f64>(p)?)))
        .collect::<Result<_>>()?;
    let reference: &Esn = models[0].1.full();
    for (id, m) in &models[1..] {
        if m.full().w_rr() != reference.w_rr() {
            return Err(CliError::Validation(format!("`{id}` was reduced from a different network")));
        }
    }

    let data = cfg.input.load(cfg.seed)?;
    let k = data.inputs.ncols();
    if data.inputs.nrows() != reference.input_dim() {
        return Err(CliError::Validation(format!(
            "input source has {} channels but the model expects {}",
            data.inputs.nrows(),
            reference.input_dim()
        )));
    }
    let first = cfg.washout.max(1);
    if k <= first || k - first < cfg.n_points {
        return Err(CliError::Validation(format!(
            "{k} input steps leave fewer than {} points after washout {}",
            cfg.n_points, cfg.washout
        )));
    }
    let states = reference.run_states(&data.inputs, &reference.zero_state())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut steps: Vec<usize> = sample(&mut rng, k - first, cfg.n_points).into_iter().map(|i| i + first).collect();
    steps.sort_unstable();
    // states[:, k-1] is the state entering step k
    let points: Vec<(DVector<f64>, DVector<f64>)> = steps
        .iter()
        .map(|&s| (states.column(s - 1).into_owned(), data.inputs.column(s).into_owned()))
        .collect();
    drop(states);

    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for (id, m) in &models {
        let reps = match m {
            LoadedModel::Full(e) => stability_sweep(e, None, None, &points)?,
            LoadedModel::Pod(e, p) => stability_sweep(e, Some(p), None, &points)?,
            LoadedModel::Deim(e, d) => stability_sweep(e, Some(d.base()), Some(d), &points)?,
        };
        summaries.push(ModelSummary {
            model_id: id.clone(),
            max_rho_full: reps.iter().map(|r| r.rho_full).fold(0.0, f64::max),
            max_rho_pod: max_opt(reps.iter().map(|r| r.rho_pod)),
            max_rho_deim: max_opt(reps.iter().map(|r| r.rho_deim)),
            pod_exceeds_full: reps.iter().filter(|r| r.rho_pod.is_some_and(|p| p > r.rho_full + 1e-8)).count(),
            deim_unstable: reps.iter().filter(|r| r.rho_deim.is_some_and(|d| d >= 1.0)).count(),
        });
        records.extend(reps.into_iter().zip(&steps).map(|(report, &step)| StabilityRow {
            model_id: id.clone(),
            step,
            report,
        }));
    }
    for s in &summaries {
        log::info!(
            "{}: max ρ full {:.4}, POD {:?}, DEIM {:?}",
            s.model_id,
            s.max_rho_full,
            s.max_rho_pod,
            s.max_rho_deim
        );
    }
    run.write_csv(
        "stability.csv",
        cfg.seed,
        records.iter().map(|r| CsvRow {
            model_id: r.model_id.clone(),
            point_id: r.report.point_id,
            step: r.step,
            rho_full: r.report.rho_full,
            rho_pod: r.report.rho_pod,
            rho_deim: r.report.rho_deim,
        }),
    )?;
    run.write_json(
        "stability.json",
        cfg.seed,
        &Output {
            steps: &steps,
            records: &records,
            models: summaries,
        },
    )?;
    Ok(())
}
