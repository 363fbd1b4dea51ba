//! Full-order echo state networks.
//!
//! State update and readout:
//!
//! ```text
//! x[k+1] = (1 − γ)·x[k] + γ·tanh(W_rr·x[k] + W_ir·u[k] + W_br)
//! y[k+1] = W_ro·x[k+1]
//! ```
//!
//! There is no output-feedback path and no direct input-to-output term.
//!
//! Random initialization draws every weight from N(0, 1) with one
//! `ChaCha8Rng` per network, seeded by `seed_from_u64(hyper.seed)`. Normal
//! deviates come from `rand_distr::StandardNormal` (ziggurat). Draw order is
//! `W_rr` row-major, then `W_ir` row-major, then `W_br`. `W_rr` is then
//! rescaled to the requested spectral radius and `W_ir`, `W_br` are multiplied
//! by their scaling factors.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsnError, Result};
use crate::linalg::spectral_radius;
use crate::reservoir::{check_dim, leaky_blend, Reservoir};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperParams {
    pub reservoir_size: usize,
    pub leak_rate: f64,
    pub spectral_radius: f64,
    pub input_scaling: f64,
    pub bias_scaling: f64,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub seed: u64,
}

impl HyperParams {
    /// Single-input, single-output defaults used throughout the experiments.
    pub fn new(reservoir_size: usize, leak_rate: f64, spectral_radius: f64, seed: u64) -> Self {
        Self {
            reservoir_size,
            leak_rate,
            spectral_radius,
            input_scaling: 0.1,
            bias_scaling: 0.1,
            n_inputs: 1,
            n_outputs: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(EsnError::InvalidHyperParams(msg));
        if self.reservoir_size == 0 {
            return bad("reservoir_size must be at least 1".into());
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return bad(format!("leak_rate must lie in (0, 1], got {}", self.leak_rate));
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return bad(format!("spectral_radius must be positive, got {}", self.spectral_radius));
        }
        if !self.input_scaling.is_finite() || !self.bias_scaling.is_finite() {
            return bad("scaling factors must be finite".into());
        }
        if self.n_inputs == 0 || self.n_outputs == 0 {
            return bad("n_inputs and n_outputs must be at least 1".into());
        }
        Ok(())
    }
}

/// A recorded run: column `k` of each matrix belongs to step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<T: Scalar> {
    pub states: DMatrix<T>,
    pub inputs: DMatrix<T>,
    pub outputs: DMatrix<T>,
}

impl<T: Scalar> StateTrajectory<T> {
    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoStateNetwork<T: Scalar> {
    pub(crate) w_rr: DMatrix<T>,
    pub(crate) w_ir: DMatrix<T>,
    pub(crate) w_br: DVector<T>,
    pub(crate) w_ro: DMatrix<T>,
    pub(crate) hyper: HyperParams,
}

impl<T: Scalar> EchoStateNetwork<T> {
    /// Draws a random network from `hyper` (see the module docs for the stream layout).
    pub fn generate(hyper: &HyperParams) -> Result<Self> {
        hyper.validate()?;
        let n = hyper.reservoir_size;
        let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
        let mut normal = || T::sample_standard_normal(&mut rng);

        let mut w_rr = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                w_rr[(i, j)] = normal();
            }
        }
        let mut w_ir = DMatrix::zeros(n, hyper.n_inputs);
        for i in 0..n {
            for j in 0..hyper.n_inputs {
                w_ir[(i, j)] = normal();
            }
        }
        let w_br = DVector::from_fn(n, |_, _| normal());

        let rho = spectral_radius(&w_rr)?;
        if rho == T::zero() {
            return Err(EsnError::InvalidHyperParams(
                "drawn reservoir matrix has zero spectral radius".into(),
            ));
        }
        w_rr *= T::of(hyper.spectral_radius) / rho;
        w_ir *= T::of(hyper.input_scaling);
        let w_br = w_br * T::of(hyper.bias_scaling);

        Ok(Self {
            w_rr,
            w_ir,
            w_br,
            w_ro: DMatrix::zeros(hyper.n_outputs, n),
            hyper: hyper.clone(),
        })
    }

    /// Assembles a network from explicit weights. Only shapes and finiteness
    /// are checked; `hyper.spectral_radius` is taken as given.
    pub fn from_parts(
        w_rr: DMatrix<T>,
        w_ir: DMatrix<T>,
        w_br: DVector<T>,
        w_ro: DMatrix<T>,
        hyper: HyperParams,
    ) -> Result<Self> {
        let n = hyper.reservoir_size;
        check_dim("w_rr rows", n, w_rr.nrows())?;
        check_dim("w_rr cols", n, w_rr.ncols())?;
        check_dim("w_ir rows", n, w_ir.nrows())?;
        check_dim("w_ir cols", hyper.n_inputs, w_ir.ncols())?;
        check_dim("w_br", n, w_br.len())?;
        check_dim("w_ro rows", hyper.n_outputs, w_ro.nrows())?;
        check_dim("w_ro cols", n, w_ro.ncols())?;
        let finite = |m: &[T]| m.iter().all(|v| v.is_finite_val());
        if !(finite(w_rr.as_slice()) && finite(w_ir.as_slice()) && finite(w_br.as_slice()) && finite(w_ro.as_slice())) {
            return Err(EsnError::NonFinite("network weights"));
        }
        Ok(Self {
            w_rr,
            w_ir,
            w_br,
            w_ro,
            hyper,
        })
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }
    pub fn w_rr(&self) -> &DMatrix<T> {
        &self.w_rr
    }
    pub fn w_ir(&self) -> &DMatrix<T> {
        &self.w_ir
    }
    pub fn w_br(&self) -> &DVector<T> {
        &self.w_br
    }
    pub fn w_ro(&self) -> &DMatrix<T> {
        &self.w_ro
    }

    /// Copy of the network with a new readout; reservoir weights are shared verbatim.
    pub fn with_readout(&self, w_ro: DMatrix<T>) -> Result<Self> {
        check_dim("w_ro rows", self.hyper.n_outputs, w_ro.nrows())?;
        check_dim("w_ro cols", self.hyper.reservoir_size, w_ro.ncols())?;
        Ok(Self {
            w_ro,
            ..self.clone()
        })
    }

    /// Pre-activation `W_rr·x + W_ir·u + W_br`.
    pub fn preactivation(&self, x: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_dim("state", self.hyper.reservoir_size, x.len())?;
        check_dim("input", self.hyper.n_inputs, u.len())?;
        Ok(&self.w_rr * x + &self.w_ir * u + &self.w_br)
    }

    /// Largest singular value of `W_rr`, reported next to the spectral radius
    /// because the classic sufficient echo-state condition is stated on it.
    pub fn max_singular_value(&self) -> T {
        crate::linalg::norm2(&self.w_rr)
    }
}

impl<T: Scalar> Reservoir<T> for EchoStateNetwork<T> {
    fn state_dim(&self) -> usize {
        self.hyper.reservoir_size
    }
    fn input_dim(&self) -> usize {
        self.hyper.n_inputs
    }
    fn output_dim(&self) -> usize {
        self.hyper.n_outputs
    }
    fn tanh_nodes(&self) -> usize {
        self.hyper.reservoir_size
    }
    fn leak_rate(&self) -> T {
        T::of(self.hyper.leak_rate)
    }
    fn readout_matrix(&self) -> &DMatrix<T> {
        &self.w_ro
    }

    fn advance(&self, state: &DVector<T>, input: DVectorView<'_, T>, pre: &mut DVector<T>, next: &mut DVector<T>) {
        pre.copy_from(&self.w_br);
        pre.gemv(T::one(), &self.w_rr, state, T::one());
        pre.gemv(T::one(), &self.w_ir, &input, T::one());
        pre.apply(|v| *v = v.tanh());
        leaky_blend(self.leak_rate(), state, pre, next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_radius_power;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_net(w_rr: f64, w_ir: f64, w_br: f64, gamma: f64) -> EchoStateNetwork<f64> {
        let mut hp = HyperParams::new(1, 1.0, 1.0, 0);
        hp.leak_rate = gamma;
        EchoStateNetwork::from_parts(
            DMatrix::from_element(1, 1, w_rr),
            DMatrix::from_element(1, 1, w_ir),
            DVector::from_element(1, w_br),
            DMatrix::zeros(1, 1),
            hp,
        )
        .unwrap()
    }

    fn small_net(n: usize, gamma: f64, seed: u64) -> EchoStateNetwork<f64> {
        let mut hp = HyperParams::new(n, gamma, 0.9, seed);
        hp.input_scaling = 0.5;
        hp.bias_scaling = 0.2;
        EchoStateNetwork::generate(&hp).unwrap()
    }

    #[test]
    fn generated_radius_matches_independent_power_iteration() {
        let mut hp = HyperParams::new(50, 1.0, 0.5, 7);
        hp.input_scaling = 1.0;
        let esn = EchoStateNetwork::<f64>::generate(&hp).unwrap();
        let rho = spectral_radius_power(esn.w_rr(), 1e-14, 200_000).unwrap();
        assert_relative_eq!(rho, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn generation_is_deterministic_and_readout_starts_at_zero() {
        let hp = HyperParams::new(40, 0.5, 0.99, 11);
        let a = EchoStateNetwork::<f64>::generate(&hp).unwrap();
        let b = EchoStateNetwork::<f64>::generate(&hp).unwrap();
        assert_eq!(a, b);
        assert!(a.w_ro().iter().all(|&v| v == 0.0));
        let c = EchoStateNetwork::<f64>::generate(&HyperParams { seed: 12, ..hp }).unwrap();
        assert_ne!(a.w_rr(), c.w_rr());
    }

    #[test]
    fn input_and_bias_scaling_are_applied() {
        let mut hp = HyperParams::new(30, 1.0, 0.9, 3);
        hp.input_scaling = 1.0;
        hp.bias_scaling = 1.0;
        let unit = EchoStateNetwork::<f64>::generate(&hp).unwrap();
        hp.input_scaling = 0.1;
        hp.bias_scaling = 0.25;
        let scaled = EchoStateNetwork::<f64>::generate(&hp).unwrap();
        assert_relative_eq!(scaled.w_ir().clone(), unit.w_ir() * 0.1, epsilon = 1e-15);
        assert_relative_eq!(scaled.w_br().clone(), unit.w_br() * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn invalid_hyperparameters_are_rejected() {
        let base = HyperParams::new(10, 0.5, 0.9, 1);
        for hp in [
            HyperParams { reservoir_size: 0, ..base.clone() },
            HyperParams { leak_rate: 0.0, ..base.clone() },
            HyperParams { leak_rate: 1.5, ..base.clone() },
            HyperParams { spectral_radius: 0.0, ..base.clone() },
            HyperParams { n_inputs: 0, ..base.clone() },
        ] {
            assert!(matches!(
                EchoStateNetwork::<f64>::generate(&hp),
                Err(EsnError::InvalidHyperParams(_))
            ));
        }
    }

    #[test]
    fn hand_evaluated_scalar_step() {
        let esn = scalar_net(0.5, 1.0, 0.0, 0.5);
        let x = esn.step(&DVector::from_element(1, 0.2), &DVector::from_element(1, 0.3)).unwrap();
        assert_relative_eq!(x[0], 0.1 + 0.5 * 0.4f64.tanh(), epsilon = 1e-15);
        assert_relative_eq!(x[0], 0.2899745, epsilon = 1e-7);
    }

    #[test]
    fn zero_weights_and_degenerate_leak() {
        let esn = scalar_net(0.0, 0.0, 0.0, 1.0);
        let x = esn.step(&DVector::from_element(1, 0.7), &DVector::from_element(1, -2.0)).unwrap();
        assert_eq!(x[0], 0.0);
        let frozen = scalar_net(0.3, 2.0, 0.1, 0.0);
        let x = frozen.step(&DVector::from_element(1, 0.7), &DVector::from_element(1, -2.0)).unwrap();
        assert_eq!(x[0], 0.7);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let esn = small_net(4, 1.0, 0);
        let err = esn.step(&DVector::zeros(3), &DVector::zeros(1)).unwrap_err();
        assert!(matches!(err, EsnError::DimensionMismatch { .. }));
        assert!(esn.readout(&DVector::zeros(5)).is_err());
    }

    #[test]
    fn run_matches_manual_iteration() {
        let esn = small_net(2, 0.6, 5);
        let w_ro = DMatrix::from_row_slice(1, 2, &[0.3, -1.1]);
        let esn = esn.with_readout(w_ro.clone()).unwrap();
        let inputs = DMatrix::from_row_slice(1, 3, &[0.5, -0.2, 0.9]);
        let traj = esn.run(&inputs, &DVector::zeros(2)).unwrap();
        let mut x = DVector::zeros(2);
        for k in 0..3 {
            let u = DVector::from_element(1, inputs[(0, k)]);
            // explicit formula, independent of the buffered update path
            let pre = esn.w_rr() * &x + esn.w_ir() * &u + esn.w_br();
            x = &x * 0.4 + pre.map(|v| v.tanh()) * 0.6;
            assert_relative_eq!(traj.states.column(k).into_owned(), x.clone(), epsilon = 1e-14);
            let y = &w_ro * &x;
            assert_relative_eq!(traj.outputs[(0, k)], y[0], epsilon = 1e-15);
        }
    }

    #[test]
    fn single_step_run_equals_step_then_readout() {
        let esn = small_net(6, 0.8, 2).with_readout(DMatrix::from_element(1, 6, 0.25)).unwrap();
        let u = DVector::from_element(1, 0.4);
        let x0 = DVector::from_fn(6, |i, _| i as f64 * 0.05);
        let traj = esn.run(&DMatrix::from_element(1, 1, 0.4), &x0).unwrap();
        let x1 = esn.step(&x0, &u).unwrap();
        assert_eq!(traj.states.column(0), x1.column(0));
        assert_eq!(traj.outputs[(0, 0)], esn.readout(&x1).unwrap()[0]);
    }

    #[test]
    fn zero_readout_gives_zero_outputs() {
        let esn = small_net(8, 1.0, 4);
        let inputs = DMatrix::from_fn(1, 20, |_, k| (k as f64).sin());
        let traj = esn.run(&inputs, &DVector::zeros(8)).unwrap();
        assert!(traj.outputs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn readout_matches_naive_product() {
        let mut hp = HyperParams::new(7, 1.0, 0.9, 9);
        hp.n_outputs = 3;
        let esn = EchoStateNetwork::<f64>::generate(&hp).unwrap();
        let w_ro = DMatrix::from_fn(3, 7, |i, j| ((i * 5 + j) as f64).cos());
        let esn = esn.with_readout(w_ro.clone()).unwrap();
        let x = DVector::from_fn(7, |i, _| (i as f64 * 0.3).sin());
        let y = esn.readout(&x).unwrap();
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..7 {
                acc += w_ro[(i, j)] * x[j];
            }
            assert_relative_eq!(y[i], acc, epsilon = 1e-14);
        }
        assert!(esn.readout(&DVector::zeros(7)).unwrap().iter().all(|&v| v == 0.0));
        // identity block returns the leading states
        let id = DMatrix::<f64>::identity(3, 7);
        let y = esn.with_readout(id).unwrap().readout(&x).unwrap();
        assert_eq!(y.as_slice(), &x.as_slice()[..3]);
    }

    #[test]
    fn non_finite_input_aborts_with_step_index() {
        let esn = small_net(5, 1.0, 1);
        let mut inputs = DMatrix::from_element(1, 10, 0.1);
        inputs[(0, 6)] = f64::NAN;
        assert_eq!(esn.run(&inputs, &DVector::zeros(5)).unwrap_err(), EsnError::Diverged { step: 6 });
    }

    #[test]
    fn f32_networks_work() {
        let hp = HyperParams::new(20, 0.7, 0.9, 1);
        let esn = EchoStateNetwork::<f32>::generate(&hp).unwrap();
        let rho = spectral_radius(esn.w_rr()).unwrap();
        assert!((rho - 0.9).abs() < 1e-5);
        let traj = esn.run(&DMatrix::from_element(1, 5, 0.3f32), &DVector::zeros(20)).unwrap();
        assert_eq!(traj.len(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn leaky_update_is_a_convex_blend(seed in 0u64..500, gamma in 0.01f64..0.99, u in -3.0f64..3.0) {
            let esn = small_net(6, gamma, seed);
            let x = DVector::from_fn(6, |i, _| ((seed as usize + i) as f64).sin());
            let uv = DVector::from_element(1, u);
            let blended = esn.step(&x, &uv).unwrap();
            let full = small_net(6, 1.0, seed).step(&x, &uv).unwrap();
            for i in 0..6 {
                let (lo, hi) = if x[i] < full[i] { (x[i], full[i]) } else { (full[i], x[i]) };
                prop_assert!(blended[i] >= lo - 1e-15 && blended[i] <= hi + 1e-15);
            }
        }

        #[test]
        fn fully_leaked_states_are_bounded(seed in 0u64..500, amp in 0.1f64..10.0) {
            let esn = small_net(10, 1.0, seed);
            let inputs = DMatrix::from_fn(1, 30, |_, k| amp * ((k as f64) * 1.3).sin());
            let x0 = DVector::from_element(10, 5.0);
            let traj = esn.run(&inputs, &x0).unwrap();
            prop_assert!(traj.states.iter().all(|v| v.abs() < 1.0));
        }

        #[test]
        fn runs_are_deterministic(seed in 0u64..200) {
            let esn = small_net(5, 0.5, seed);
            let inputs = DMatrix::from_fn(1, 15, |_, k| (k as f64 * 0.7).cos());
            let a = esn.run(&inputs, &DVector::zeros(5)).unwrap();
            let b = small_net(5, 0.5, seed).run(&inputs, &DVector::zeros(5)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
