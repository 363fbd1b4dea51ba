//! `reduce`: POD (and optionally DEIM) reduction of a trained network.
//!
//! ```toml
//! model = "out/trained.json"
//! seed = 1                   # seeds a generated snapshot input
//! snapshot_start = 200       # snapshots are the states in [start, end)
//! snapshot_end = 2000        # default: the source's training split, else its length
//! pod_cutoff = 0.01          # or pod_rank = 66
//! deim_cutoff = 0.05         # optional
//! size_table = [0.5, 0.1, 0.01]  # optional cutoff -> m listing in the report
//! name = "reduced"
//!
//! [input]                    # narma10 | csv | white_noise | uniform | aprbs
//! kind = "narma10"
//! length = 5000
//! ```
//!
//! The reduced readout is the full readout projected onto the basis.

use std::path::PathBuf;

use esn_mor::io::{load_model, save_exact, DeimRecord, PodRecord};
use esn_mor::{Basis, Deim, Esn, Pod, Reservoir};
use serde::{Deserialize, Serialize};

use crate::config::{check, CommandConfig, InputSource};
use crate::error::{CliError, Result};
use crate::output::{model_id, Run};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceConfig {
    pub seed: u64,
    pub model: PathBuf,
    pub snapshot_start: usize,
    pub snapshot_end: Option<usize>,
    pub pod_cutoff: Option<f64>,
    pub pod_rank: Option<usize>,
    pub deim_cutoff: Option<f64>,
    pub size_table: Vec<f64>,
    pub name: String,
    pub input: InputSource,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            model: PathBuf::new(),
            snapshot_start: esn_mor::training::DEFAULT_WASHOUT,
            snapshot_end: None,
            pod_cutoff: None,
            pod_rank: None,
            deim_cutoff: None,
            size_table: Vec::new(),
            name: "reduced".into(),
            input: InputSource::default(),
        }
    }
}

fn valid_cutoff(c: f64) -> bool {
    (0.0..1.0).contains(&c)
}

impl CommandConfig for ReduceConfig {
    const NAME: &'static str = "reduce";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn resolve(&mut self) -> Result<()> {
        check(!self.model.as_os_str().is_empty(), || "`model` is required".into())?;
        match (self.pod_cutoff, self.pod_rank) {
            (Some(_), Some(_)) => return Err(CliError::Config("set at most one of `pod_cutoff` and `pod_rank`".into())),
            (None, None) => self.pod_cutoff = Some(0.01),
            _ => {}
        }
        if self.snapshot_end.is_none() {
            self.snapshot_end = self.input.train_end();
        }
        for c in self.pod_cutoff.iter().chain(&self.deim_cutoff).chain(&self.size_table) {
            check(valid_cutoff(*c), || format!("energy cutoffs must lie in [0, 1), got {c}"))?;
        }
        if let Some(m) = self.pod_rank {
            check(m >= 1, || "pod_rank must be at least 1".into())?;
        }
        check(!self.name.is_empty(), || "name must not be empty".into())
    }
}

#[derive(Debug, Serialize)]
struct SizeRow {
    cutoff: f64,
    m: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    model_id: String,
    source_model: String,
    n_states: usize,
    snapshot_range: [usize; 2],
    rank_bound: usize,
    m: usize,
    energy_kept: f64,
    deim_cutoff: Option<f64>,
    m_d: Option<usize>,
    /// `‖(PᵀU)⁻¹‖₂`, the DEIM error amplification factor.
    deim_inv_norm: Option<f64>,
    sigma: Vec<f64>,
    /// Max abs output difference between full and reduced models driven by
    /// the snapshot input from the zero state.
    max_output_deviation: Option<f64>,
    reduced_run_error: Option<String>,
    size_table: Vec<SizeRow>,
}

pub fn run(cfg: &ReduceConfig, run: &Run) -> Result<()> {
    let esn: Esn = load_model::<f64>(&cfg.model)?.full().clone();
    let data = cfg.input.load(cfg.seed)?;
    if data.inputs.nrows() != esn.input_dim() {
        return Err(CliError::Validation(format!(
            "input source has {} channels but the model expects {}",
            data.inputs.nrows(),
            esn.input_dim()
        )));
    }
    let k = data.inputs.ncols();
    let end = cfg.snapshot_end.unwrap_or(k).min(k);
    if cfg.snapshot_start >= end {
        return Err(CliError::Validation(format!(
            "empty snapshot window [{}, {end}) for {k} input steps",
            cfg.snapshot_start
        )));
    }
    let states = esn.run_states(&data.inputs, &esn.zero_state())?;
    let basis = Basis::from_snapshots(&states.columns_range(cfg.snapshot_start..end).into_owned())?;
    let pe = match (cfg.pod_rank, cfg.pod_cutoff) {
        (Some(m), _) => Pod::from_rank(&esn, &basis, m)?,
        (None, Some(c)) => Pod::from_cutoff(&esn, &basis, c)?,
        (None, None) => unreachable!("resolved"),
    };
    let de = cfg.deim_cutoff.map(|c| Deim::build(&pe, &basis, c)).transpose()?;

    let reduced: &dyn Reservoir<f64> = match &de {
        Some(d) => d,
        None => &pe,
    };
    let (max_output_deviation, reduced_run_error) = match reduced.run(&data.inputs, &reduced.zero_state()) {
        Ok(traj) => {
            let full = esn.run(&data.inputs, &esn.zero_state())?;
            (Some((&full.outputs - &traj.outputs).amax()), None)
        }
        Err(e) => {
            log::warn!("reduced model failed on the snapshot input: {e}");
            (None, Some(e.to_string()))
        }
    };

    let file = format!("{}.json", cfg.name);
    let p = run.path(&file)?;
    let prov = Some(run.provenance(cfg.seed));
    match &de {
        Some(d) => save_exact(&p, &DeimRecord::from_model(&esn, d, Some(&basis), prov)),
        None => save_exact(&p, &PodRecord::from_model(&esn, &pe, Some(&basis), prov)),
    }
    .map_err(|e| CliError::io(&p, e))?;

    let size_table = cfg
        .size_table
        .iter()
        .map(|&c| Ok(SizeRow { cutoff: c, m: basis.rank_for_cutoff(c)? }))
        .collect::<Result<Vec<_>>>()?;
    let report = Report {
        model_id: cfg.name.clone(),
        source_model: model_id(&cfg.model),
        n_states: esn.state_dim(),
        snapshot_range: [cfg.snapshot_start, end],
        rank_bound: basis.rank_bound(),
        m: pe.reduced_dim(),
        energy_kept: basis.kept_energy(pe.reduced_dim()),
        deim_cutoff: cfg.deim_cutoff,
        m_d: de.as_ref().map(|d| d.n_points()),
        deim_inv_norm: de.as_ref().map(|d| d.operators().pivot_norms().1),
        sigma: basis.sigma.iter().copied().collect(),
        max_output_deviation,
        reduced_run_error,
        size_table,
    };
    log::info!("m = {}, m_d = {:?}", report.m, report.m_d);
    run.write_json(&format!("{}-report.json", cfg.name), cfg.seed, &report)?;
    Ok(())
}
