//! NARMA benchmark recursion and dataset.

use super::input_row;
use super::signals::{gen_signal, SignalSpec};
use crate::error::{EsnError, Result};
use crate::reservoir::DIVERGENCE_LIMIT;
use crate::scalar::Scalar;
use crate::training::Dataset;

pub const NARMA_ORDER: usize = 10;
pub const NARMA_INPUT_LO: f64 = 0.0;
pub const NARMA_INPUT_HI: f64 = 0.05;
pub const NARMA_LENGTH: usize = 5000;
/// Samples labelled as training; the remainder is the test split.
pub const NARMA_TRAIN: usize = 2000;
/// End of the ridge-fitting part of the training samples; the rest of the
/// training samples select λ.
pub const NARMA_FIT: usize = 1600;

/// `y[k] = 0.3·y[k−1] + 0.05·y[k−1]·Σ_{i=1..m} y[k−i] + 1.5·u[k−m+1]·u[k] + 0.1`
/// with zero history. `out[k]` is the response to `u[0..=k]`.
pub fn narma_sim(u: &[f64], order: usize) -> Result<Vec<f64>> {
    if order == 0 {
        return Err(EsnError::InvalidArgument("NARMA order must be at least 1".into()));
    }
    let mut y = Vec::with_capacity(u.len());
    let mut window = 0.0;
    for k in 0..u.len() {
        let prev = if k >= 1 { y[k - 1] } else { 0.0 };
        if k >= 1 {
            window += y[k - 1];
        }
        if k > order {
            window -= y[k - 1 - order];
        }
        let lagged = if k + 1 >= order { u[k + 1 - order] } else { 0.0 };
        let v = 0.3 * prev + 0.05 * prev * window + 1.5 * lagged * u[k] + 0.1;
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(EsnError::Diverged { step: k });
        }
        y.push(v);
    }
    Ok(y)
}

/// Input uniform in `[0, 0.05]`, target the order-10 recursion.
pub fn narma_dataset<T: Scalar>(length: usize, seed: u64, train_end: usize, val_end: usize) -> Result<Dataset<T>> {
    let u = gen_signal(&SignalSpec::uniform(NARMA_INPUT_LO, NARMA_INPUT_HI, length, seed))?;
    let y = narma_sim(&u, NARMA_ORDER)?;
    let mut data = Dataset::new(input_row(&u), input_row::<T>(&y), train_end, val_end)?;
    data.input_names = vec!["u".into()];
    data.output_names = vec!["y".into()];
    Ok(data)
}

/// The standard protocol: 5000 samples, λ chosen on samples 1600..2000,
/// readout refitted on the first 2000, tested on the last 3000.
pub fn narma_default<T: Scalar>(seed: u64) -> Result<Dataset<T>> {
    narma_dataset(NARMA_LENGTH, seed, NARMA_FIT, NARMA_TRAIN)
}
