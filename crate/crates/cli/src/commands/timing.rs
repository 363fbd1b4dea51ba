//! `timing`: per-step wall-clock cost of model files on one shared input.
//!
//! ```toml
//! models = ["out/trained.json", "out/reduced.json"]
//! seed = 1          # seeds the input, uniform in [input_lo, input_hi]
//! steps = 5000      # driven steps per run, warmup included
//! warmup = 500
//! repeats = 1       # runs per model, interleaved across models
//! input_lo = 0.0
//! input_hi = 0.05
//! ```
//!
//! Models are stepped one at a time on the calling thread.

use std::path::PathBuf;

use esn_mor::io::{load_model, LoadedModel};
use esn_mor::tasks::input_row;
use esn_mor::tasks::signals::{gen_signal, SignalSpec};
use esn_mor::timing::{time_steps, DEFAULT_WARMUP};
use esn_mor::{Reservoir, TimingStats};
use serde::{Deserialize, Serialize};

use crate::config::{check, CommandConfig};
use crate::error::{CliError, Result};
use crate::output::{model_id, Run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    pub seed: u64,
    pub models: Vec<PathBuf>,
    pub steps: usize,
    pub warmup: usize,
    pub repeats: usize,
    pub input_lo: f64,
    pub input_hi: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            models: Vec::new(),
            steps: 5000,
            warmup: DEFAULT_WARMUP,
            repeats: 1,
            input_lo: 0.0,
            input_hi: 0.05,
        }
    }
}

impl CommandConfig for TimingConfig {
    const NAME: &'static str = "timing";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        check(!self.models.is_empty(), || "`models` must list at least one model file".into())?;
        check(self.steps > self.warmup, || "steps must exceed warmup".into())?;
        check(self.repeats >= 1, || "repeats must be at least 1".into())?;
        check(self.input_lo <= self.input_hi, || "input_lo must not exceed input_hi".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRow {
    pub model_id: String,
    pub repeat: usize,
    pub step: usize,
    pub ms: f64,
}

/// One timed run; flat so it serializes to CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRow {
    pub model_id: String,
    pub repeat: usize,
    pub n_states: usize,
    pub n_tanh_nodes: usize,
    pub mean_step_ms: f64,
    pub std_step_ms: f64,
    pub n_steps: usize,
    pub warmup_steps: usize,
}

impl TimingRow {
    fn new(repeat: usize, s: TimingStats) -> Self {
        Self {
            model_id: s.model_id,
            repeat,
            n_states: s.n_states,
            n_tanh_nodes: s.n_tanh_nodes,
            mean_step_ms: s.mean_step_ms,
            std_step_ms: s.std_step_ms,
            n_steps: s.n_steps,
            warmup_steps: s.warmup_steps,
        }
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    steps: usize,
    warmup: usize,
    runs: &'a [TimingRow],
    /// Per model: mean over repeats of the mean step time.
    mean_step_ms: Vec<(String, f64)>,
}

fn as_reservoir(m: &LoadedModel<f64>) -> &dyn Reservoir<f64> {
    match m {
        LoadedModel::Full(e) => e,
        LoadedModel::Pod(_, p) => p,
        LoadedModel::Deim(_, d) => d,
    }
}

pub fn run(cfg: &TimingConfig, run: &Run) -> Result<()> {
    let models: Vec<(String, LoadedModel<f64>)> = cfg
        .models
        .iter()
        .map(|p| Ok((model_id(p), load_model::<f64>(p)?)))
        .collect::<Result<_>>()?;
    for (i, (id, _)) in models.iter().enumerate() {
        if models[..i].iter().any(|(o, _)| o == id) {
            return Err(CliError::Validation(format!("two model files share the id `{id}`")));
        }
    }
    let u = gen_signal(&SignalSpec::uniform(cfg.input_lo, cfg.input_hi, cfg.steps, cfg.seed))?;
    let inputs = input_row::<f64>(&u);

    let mut runs = Vec::new();
    let mut steps = Vec::new();
    for repeat in 0..cfg.repeats {
        for (id, m) in &models {
            let (stats, log) = time_steps(as_reservoir(m), id, &inputs, cfg.warmup)?;
            log::info!("{id}: {:.4} ± {:.4} ms/step", stats.mean_step_ms, stats.std_step_ms);
            steps.extend(log.into_iter().enumerate().map(|(i, ms)| StepRow {
                model_id: id.clone(),
                repeat,
                step: cfg.warmup + i,
                ms,
            }));
            runs.push(TimingRow::new(repeat, stats));
        }
    }
    let mean_step_ms = models
        .iter()
        .map(|(id, _)| {
            let v: Vec<f64> = runs.iter().filter(|r| &r.model_id == id).map(|r| r.mean_step_ms).collect();
            (id.clone(), v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    run.write_csv("timing-steps.csv", cfg.seed, &steps)?;
    run.write_csv("timing.csv", cfg.seed, &runs)?;
    run.write_json(
        "timing.json",
        cfg.seed,
        &Summary {
            steps: cfg.steps,
            warmup: cfg.warmup,
            runs: &runs,
            mean_step_ms,
        },
    )?;
    Ok(())
}
