//! The steppable-model abstraction shared by full, POD and DEIM networks.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{EsnError, Result};
use crate::esn::StateTrajectory;
use crate::scalar::Scalar;

/// A state component beyond this magnitude is treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// A leaky-tanh recurrent model with a linear, feedback-free readout.
pub trait Reservoir<T: Scalar>: Send + Sync {
    /// Dimension of the evolving state (`N` for a full network, `m` when reduced).
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Number of `tanh` evaluations one step performs.
    fn tanh_nodes(&self) -> usize;
    fn leak_rate(&self) -> T;
    /// `output_dim × state_dim` readout.
    fn readout_matrix(&self) -> &DMatrix<T>;

    /// Unchecked state update. `pre` must hold `tanh_nodes()` entries and
    /// `next` `state_dim()` entries; both are overwritten.
    fn advance(
        &self,
        state: &DVector<T>,
        input: DVectorView<'_, T>,
        pre: &mut DVector<T>,
        next: &mut DVector<T>,
    );

    fn zero_state(&self) -> DVector<T> {
        DVector::zeros(self.state_dim())
    }

    fn step(&self, state: &DVector<T>, input: &DVector<T>) -> Result<DVector<T>> {
        check_dim("state", self.state_dim(), state.len())?;
        check_dim("input", self.input_dim(), input.len())?;
        let mut pre = DVector::zeros(self.tanh_nodes());
        let mut next = DVector::zeros(self.state_dim());
        self.advance(state, input.column(0), &mut pre, &mut next);
        Ok(next)
    }

    fn readout(&self, state: &DVector<T>) -> Result<DVector<T>> {
        check_dim("state", self.state_dim(), state.len())?;
        Ok(self.readout_matrix() * state)
    }

    /// States `x[1..=K]` (one column per input column), without outputs.
    fn run_states(&self, inputs: &DMatrix<T>, initial: &DVector<T>) -> Result<DMatrix<T>> {
        check_dim("input rows", self.input_dim(), inputs.nrows())?;
        check_dim("initial state", self.state_dim(), initial.len())?;
        if inputs.ncols() == 0 {
            return Err(EsnError::InvalidArgument("input sequence is empty".into()));
        }
        if initial.iter().any(|v| !v.is_finite_val()) {
            return Err(EsnError::NonFinite("initial state"));
        }
        let k = inputs.ncols();
        let mut states = DMatrix::zeros(self.state_dim(), k);
        let mut pre = DVector::zeros(self.tanh_nodes());
        let mut cur = initial.clone();
        let mut next = DVector::zeros(self.state_dim());
        let limit = T::of(DIVERGENCE_LIMIT);
        for step in 0..k {
            self.advance(&cur, inputs.column(step), &mut pre, &mut next);
            if next.iter().any(|v| !v.is_finite_val() || v.abs() > limit) {
                return Err(EsnError::Diverged { step });
            }
            states.set_column(step, &next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(states)
    }

    /// Drives the model with `inputs` and records states and readout outputs.
    fn run(&self, inputs: &DMatrix<T>, initial: &DVector<T>) -> Result<StateTrajectory<T>> {
        let states = self.run_states(inputs, initial)?;
        let outputs = self.readout_matrix() * &states;
        Ok(StateTrajectory {
            states,
            inputs: inputs.clone(),
            outputs,
        })
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(EsnError::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

/// `next = (1 − γ)·state + γ·lifted`, elementwise.
#[inline]
pub(crate) fn leaky_blend<T: Scalar>(gamma: T, state: &DVector<T>, update: &DVector<T>, next: &mut DVector<T>) {
    let keep = T::one() - gamma;
    for ((n, &s), &u) in next.iter_mut().zip(state.iter()).zip(update.iter()) {
        *n = keep * s + gamma * u;
    }
}
