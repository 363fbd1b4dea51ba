//! Per-step wall-clock timing of steppable models.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{EsnError, Result};
use crate::reservoir::{check_dim, Reservoir, DIVERGENCE_LIMIT};
use crate::scalar::Scalar;

pub const DEFAULT_WARMUP: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub model_id: String,
    pub n_states: usize,
    pub n_tanh_nodes: usize,
    pub mean_step_ms: f64,
    /// Sample standard deviation (zero for a single step).
    pub std_step_ms: f64,
    pub n_steps: usize,
    pub warmup_steps: usize,
}

impl TimingStats {
    /// Summarizes a log of post-warmup step durations in milliseconds.
    pub fn from_log(model_id: &str, n_states: usize, n_tanh_nodes: usize, log_ms: &[f64], warmup_steps: usize) -> Self {
        let n = log_ms.len();
        let mean = if n == 0 { 0.0 } else { log_ms.iter().sum::<f64>() / n as f64 };
        let std = if n < 2 {
            0.0
        } else {
            (log_ms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self {
            model_id: model_id.to_string(),
            n_states,
            n_tanh_nodes,
            mean_step_ms: mean,
            std_step_ms: std,
            n_steps: n,
            warmup_steps,
        }
    }
}

/// Steps `model` through every column of `inputs` from the zero state,
/// timing each state update with a monotonic clock. The first `warmup`
/// steps are run but not recorded. Returns the summary and the raw log.
pub fn time_steps<T: Scalar, M: Reservoir<T> + ?Sized>(
    model: &M,
    model_id: &str,
    inputs: &DMatrix<T>,
    warmup: usize,
) -> Result<(TimingStats, Vec<f64>)> {
    check_dim("input rows", model.input_dim(), inputs.nrows())?;
    if inputs.ncols() <= warmup {
        return Err(EsnError::InvalidArgument(format!(
            "{} steps leave nothing to time after a warmup of {warmup}",
            inputs.ncols()
        )));
    }
    let mut pre = DVector::zeros(model.tanh_nodes());
    let mut cur = model.zero_state();
    let mut next = model.zero_state();
    let limit = T::of(DIVERGENCE_LIMIT);
    let mut log = Vec::with_capacity(inputs.ncols() - warmup);
    for step in 0..inputs.ncols() {
        let t0 = Instant::now();
        model.advance(&cur, inputs.column(step), &mut pre, &mut next);
        let dt = t0.elapsed();
        if next.iter().any(|v| !v.is_finite_val() || v.abs() > limit) {
            return Err(EsnError::Diverged { step });
        }
        if step >= warmup {
            log.push(dt.as_secs_f64() * 1e3);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let stats = TimingStats::from_log(model_id, model.state_dim(), model.tanh_nodes(), &log, warmup);
    Ok((stats, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::{EchoStateNetwork, HyperParams};
    use approx::assert_relative_eq;

    #[test]
    fn stats_recompute_from_raw_log() {
        let esn = EchoStateNetwork::<f64>::generate(&HyperParams::new(60, 0.5, 0.9, 1)).unwrap();
        let u = DMatrix::from_fn(1, 700, |_, k| (k as f64 * 0.1).sin());
        let (stats, log) = time_steps(&esn, "full", &u, 200).unwrap();
        assert_eq!(stats.n_steps, 500);
        assert_eq!(log.len(), 500);
        assert_eq!((stats.n_states, stats.n_tanh_nodes, stats.warmup_steps), (60, 60, 200));
        let mean = log.iter().sum::<f64>() / 500.0;
        let var = log.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / 499.0;
        assert_relative_eq!(stats.mean_step_ms, mean, epsilon = 1e-9);
        assert_relative_eq!(stats.std_step_ms, var.sqrt(), epsilon = 1e-9);
        assert!(stats.mean_step_ms > 0.0);
    }

    #[test]
    fn known_log_summary() {
        let s = TimingStats::from_log("m", 3, 3, &[1.0, 2.0, 3.0], 0);
        assert_eq!(s.mean_step_ms, 2.0);
        assert_eq!(s.std_step_ms, 1.0);
        assert_eq!(TimingStats::from_log("m", 3, 3, &[4.0], 0).std_step_ms, 0.0);
    }

    #[test]
    fn warmup_must_leave_steps() {
        let esn = EchoStateNetwork::<f64>::generate(&HyperParams::new(5, 0.5, 0.9, 1)).unwrap();
        assert!(time_steps(&esn, "x", &DMatrix::zeros(1, 10), 10).is_err());
    }
}
