//! `train`: fit the ridge readout of a full network.
//!
//! ```toml
//! model = "out/esn-s1.json"
//! seed = 1                 # seeds the builtin task's input
//! task = "narma10"         # the default; or: dataset = "data.csv"
//! length = 5000            # builtin task length
//! train_end = 1600         # λ is fitted on [washout, train_end) ...
//! val_end = 2000           # ... chosen on [train_end, val_end), refitted on [washout, val_end)
//! washout = 200
//! lambda = 1e-6            # optional: fixes λ and skips the search
//! lambda_grid = [1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1]
//! name = "trained"
//! ```
//!
//! `washout >= train_end` is a validation error (exit code 3).

use std::path::PathBuf;

use esn_mor::io::{load_model, save_esn};
use esn_mor::tasks::narma::{narma_dataset, NARMA_FIT, NARMA_LENGTH, NARMA_TRAIN};
use esn_mor::training::{default_lambda_grid, train_readout, Dataset, DEFAULT_WASHOUT};
use esn_mor::{FitReport, Reservoir, Regularization};
use serde::{Deserialize, Serialize};

use crate::config::{check, CommandConfig};
use crate::error::{CliError, Result};
use crate::output::{model_id, Run};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Narma10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub model: PathBuf,
    pub task: Option<Task>,
    pub dataset: Option<PathBuf>,
    pub length: Option<usize>,
    pub train_end: Option<usize>,
    pub val_end: Option<usize>,
    pub washout: usize,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub name: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            model: PathBuf::new(),
            task: None,
            dataset: None,
            length: None,
            train_end: None,
            val_end: None,
            washout: DEFAULT_WASHOUT,
            lambda: None,
            lambda_grid: None,
            name: "trained".into(),
        }
    }
}

impl CommandConfig for TrainConfig {
    const NAME: &'static str = "train";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        check(!self.model.as_os_str().is_empty(), || "`model` is required".into())?;
        if self.task.is_none() && self.dataset.is_none() {
            self.task = Some(Task::Narma10);
        }
        match (self.task, &self.dataset) {
            (Some(Task::Narma10), None) => {
                self.length.get_or_insert(NARMA_LENGTH);
                self.train_end.get_or_insert(NARMA_FIT);
                self.val_end.get_or_insert(NARMA_TRAIN);
            }
            (None, Some(_)) => {
                check(self.length.is_none(), || "`length` only applies to a builtin task".into())?;
                let t = self
                    .train_end
                    .ok_or_else(|| CliError::Config("`train_end` is required with a dataset".into()))?;
                self.val_end.get_or_insert(t);
            }
            _ => return Err(CliError::Config("set exactly one of `task` and `dataset`".into())),
        }
        if self.lambda.is_none() && self.lambda_grid.is_none() {
            self.lambda_grid = Some(default_lambda_grid());
        }
        if let Some(l) = self.lambda {
            check(l > 0.0 && l.is_finite(), || format!("lambda must be positive, got {l}"))?;
        }
        if let Some(g) = &self.lambda_grid {
            check(!g.is_empty() && g.iter().all(|l| *l > 0.0 && l.is_finite()), || {
                "lambda_grid must hold positive values".into()
            })?;
        }
        check(!self.name.is_empty(), || "name must not be empty".into())
    }
}

impl TrainConfig {
    pub fn regularization(&self) -> Regularization {
        match self.lambda {
            Some(l) => Regularization::Fixed(l),
            None => Regularization::Validate(self.lambda_grid.clone().unwrap_or_else(default_lambda_grid)),
        }
    }

    pub fn dataset(&self) -> Result<Dataset<f64>> {
        let (t, v) = (self.train_end.unwrap_or(0), self.val_end.unwrap_or(0));
        Ok(match (self.task, &self.dataset) {
            (Some(Task::Narma10), _) => narma_dataset(self.length.unwrap_or(NARMA_LENGTH), self.seed, t, v)?,
            (_, Some(path)) => Dataset::load_csv(path, 1, 1)?.with_split(t, v)?,
            _ => unreachable!("checked in resolve"),
        })
    }
}

#[derive(Serialize)]
struct Report<'a> {
    model_id: String,
    source_model: String,
    input_names: &'a [String],
    output_names: &'a [String],
    samples: usize,
    train_end: usize,
    val_end: usize,
    #[serde(flatten)]
    fit: &'a FitReport,
}

pub fn run(cfg: &TrainConfig, run: &Run) -> Result<()> {
    let loaded = load_model::<f64>(&cfg.model)?;
    let esn = match loaded {
        esn_mor::io::LoadedModel::Full(e) => e,
        other => {
            return Err(CliError::Validation(format!(
                "`train` expects a full network, {} is a {:?} model",
                cfg.model.display(),
                other.kind()
            )))
        }
    };
    let data = cfg.dataset()?;
    if data.inputs.nrows() != esn.input_dim() || data.targets.nrows() != esn.output_dim() {
        return Err(CliError::Validation(format!(
            "dataset has {} inputs / {} outputs but the model expects {} / {}",
            data.inputs.nrows(),
            data.targets.nrows(),
            esn.input_dim(),
            esn.output_dim()
        )));
    }
    let (trained, fit) = train_readout(&esn, &data, cfg.washout, &cfg.regularization())?;
    let file = format!("{}.json", cfg.name);
    let p = run.path(&file)?;
    save_esn(&p, &trained, Some(run.provenance(cfg.seed))).map_err(|e| CliError::io(&p, e))?;
    log::info!("λ = {:e}, test R² = {:?}", fit.lambda, fit.test_r2);
    run.write_json(
        &format!("{}-report.json", cfg.name),
        cfg.seed,
        &Report {
            model_id: cfg.name.clone(),
            source_model: model_id(&cfg.model),
            input_names: &data.input_names,
            output_names: &data.output_names,
            samples: data.len(),
            train_end: data.train_end,
            val_end: data.val_end,
            fit: &fit,
        },
    )?;
    Ok(())
}
