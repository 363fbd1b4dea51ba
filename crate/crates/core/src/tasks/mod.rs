//! Benchmark signals and tasks.

pub mod memory;
pub mod narma;
pub mod profile;
pub mod signals;

use nalgebra::DMatrix;

use crate::scalar::Scalar;

/// A scalar series as a `1 × K` input matrix.
pub fn input_row<T: Scalar>(u: &[f64]) -> DMatrix<T> {
    DMatrix::from_iterator(1, u.len(), u.iter().map(|&v| T::of(v)))
}
