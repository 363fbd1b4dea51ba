//! Memory capacity: how well linear readouts recover delayed inputs.
//!
//! The model is driven once with a white-noise series `η`. For each delay
//! `n = 1..N_MC` a ridge readout reconstructs `η[k−n]` from the state at `k`;
//! all readouts share one factorization of the training Gram matrix. The
//! score `R_n` is the squared correlation on the held-out half and
//! `MC = Σ R_n`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::input_row;
use crate::error::{EsnError, Result};
use crate::reservoir::Reservoir;
use crate::scalar::Scalar;
use crate::training::{Dataset, RidgeSystem, DEFAULT_LAMBDA, DEFAULT_WASHOUT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub n_mc: usize,
    pub washout: usize,
    pub lambda: f64,
    /// Length of the driving series.
    pub length: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_mc: 100,
            washout: DEFAULT_WASHOUT,
            lambda: DEFAULT_LAMBDA,
            length: 6000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// `r_n[i]` is the score for delay `i + 1`.
    pub r_n: Vec<f64>,
    pub mc: f64,
    pub n_mc: usize,
    pub n_states: usize,
}

impl McResult {
    /// `Σ_{n ≤ upto} R_n`.
    pub fn partial_sum(&self, upto: usize) -> f64 {
        self.r_n.iter().take(upto).sum()
    }
}

/// Pairs `(η[k], η[k−n])` for `k = n..K`.
pub fn delay_dataset(eta: &[f64], n: usize) -> Result<Dataset<f64>> {
    if n >= eta.len() {
        return Err(EsnError::InvalidArgument(format!(
            "delay {n} needs more than {} samples",
            eta.len()
        )));
    }
    let k = eta.len() - n;
    Dataset::new(input_row(&eta[n..]), input_row(&eta[..k]), k, k)
}

/// Squared Pearson correlation; `None` when either series has zero variance.
pub fn determination_coefficient(y: &[f64], d: &[f64]) -> Option<f64> {
    if y.len() != d.len() || y.len() < 2 {
        return None;
    }
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let md = d.iter().sum::<f64>() / n;
    let (mut cov, mut vy, mut vd) = (0.0, 0.0, 0.0);
    for (&a, &b) in y.iter().zip(d) {
        let (ea, eb) = (a - my, b - md);
        cov += ea * eb;
        vy += ea * ea;
        vd += eb * eb;
    }
    if vy == 0.0 || vd == 0.0 {
        return None;
    }
    Some((cov * cov / (vy * vd)).min(1.0))
}

/// Memory capacity of a single-input model driven by `eta`.
///
/// Usable steps start after `max(washout, n_mc)` so every delay has the
/// same aligned rows; the first half trains, the second half scores.
pub fn memory_capacity<T: Scalar, M: Reservoir<T> + ?Sized>(model: &M, eta: &[f64], cfg: &McConfig) -> Result<McResult> {
    if model.input_dim() != 1 {
        return Err(EsnError::InvalidArgument("memory capacity needs a single-input model".into()));
    }
    if cfg.n_mc == 0 || !(cfg.lambda > 0.0) {
        return Err(EsnError::InvalidArgument("n_mc must be ≥ 1 and lambda > 0".into()));
    }
    let k = eta.len();
    let start = cfg.washout.max(cfg.n_mc);
    if k < start + 4 {
        return Err(EsnError::InvalidArgument(format!(
            "series of {k} samples is too short for washout {} and {} delays",
            cfg.washout, cfg.n_mc
        )));
    }
    let mid = start + (k - start) / 2;
    let states = model.run_states(&input_row(eta), &model.zero_state())?;
    let s_tr = states.columns_range(start..mid).into_owned();
    let s_te = states.columns_range(mid..k).into_owned();

    let targets = DMatrix::from_fn(mid - start, cfg.n_mc, |r, c| T::of(eta[start + r - (c + 1)]));
    let system = RidgeSystem::new(&s_tr, T::of(cfg.lambda))?;
    let w = system.solve(&(&s_tr * targets));
    let pred = w.tr_mul(&s_te);

    let r_n: Vec<f64> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|c| {
            let y: Vec<f64> = pred.row(c).iter().map(|v| v.as_f64()).collect();
            let d = &eta[mid - (c + 1)..k - (c + 1)];
            determination_coefficient(&y, d).unwrap_or_else(|| {
                log::warn!("delay {}: zero-variance series, scoring 0", c + 1);
                0.0
            })
        })
        .collect();
    Ok(McResult {
        mc: r_n.iter().sum(),
        r_n,
        n_mc: cfg.n_mc,
        n_states: model.state_dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::{EchoStateNetwork, HyperParams};
    use crate::tasks::signals::{gen_signal, SignalSpec};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    #[test]
    fn delay_zero_is_identity_and_one_aligns() {
        let d = delay_dataset(&[1.0, 2.0, 3.0, 4.0], 0).unwrap();
        assert_eq!(d.inputs, d.targets);
        let d = delay_dataset(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        let pairs: Vec<_> = d.inputs.iter().zip(d.targets.iter()).map(|(a, b)| (*a, *b)).collect();
        assert_eq!(pairs, vec![(2.0, 1.0), (3.0, 2.0), (4.0, 3.0)]);
        assert!(delay_dataset(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn delay_alignment_matches_index_arithmetic() {
        let eta = gen_signal(&SignalSpec::white_noise(60, 2)).unwrap();
        let d = delay_dataset(&eta, 7).unwrap();
        for j in 0..d.len() {
            assert_eq!(d.inputs[(0, j)], eta[j + 7]);
            assert_eq!(d.targets[(0, j)], eta[j]);
        }
    }

    #[test]
    fn determination_examples() {
        let d = [0.3, -1.0, 2.0, 0.5, 0.1];
        assert_relative_eq!(determination_coefficient(&d, &d).unwrap(), 1.0, epsilon = 1e-15);
        let y: Vec<f64> = d.iter().map(|v| -2.0 * v + 5.0).collect();
        assert_relative_eq!(determination_coefficient(&y, &d).unwrap(), 1.0, epsilon = 1e-14);
        assert!(determination_coefficient(&[1.0; 5], &d).is_none());
        let a = gen_signal(&SignalSpec::white_noise(10_000, 1)).unwrap();
        let b = gen_signal(&SignalSpec::white_noise(10_000, 2)).unwrap();
        assert!(determination_coefficient(&a, &b).unwrap() < 0.01);
    }

    /// Shift register of `depth` cells holding the last inputs.
    struct DelayLine {
        depth: usize,
        readout: DMatrix<f64>,
    }

    impl Reservoir<f64> for DelayLine {
        fn state_dim(&self) -> usize {
            self.depth
        }
        fn input_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            1
        }
        fn tanh_nodes(&self) -> usize {
            0
        }
        fn leak_rate(&self) -> f64 {
            1.0
        }
        fn readout_matrix(&self) -> &DMatrix<f64> {
            &self.readout
        }
        fn advance(
            &self,
            state: &DVector<f64>,
            input: nalgebra::DVectorView<'_, f64>,
            _pre: &mut DVector<f64>,
            next: &mut DVector<f64>,
        ) {
            // cell i holds η[k−i]
            next[0] = input[0];
            for i in 1..self.depth {
                next[i] = state[i - 1];
            }
        }
    }

    #[test]
    fn five_stage_delay_line_has_capacity_five() {
        let line = DelayLine {
            depth: 6,
            readout: DMatrix::zeros(1, 6),
        };
        let eta = gen_signal(&SignalSpec::white_noise(4000, 5)).unwrap();
        let res = memory_capacity(&line, &eta, &McConfig::default()).unwrap();
        for n in 0..5 {
            assert!(res.r_n[n] > 1.0 - 1e-6, "delay {}: {}", n + 1, res.r_n[n]);
        }
        assert!(res.r_n[5..].iter().all(|&r| r < 0.02));
        assert!((res.mc - 5.0).abs() < 0.5, "mc {}", res.mc);
    }

    #[test]
    fn small_network_capacity_is_bounded() {
        let esn = EchoStateNetwork::<f64>::generate(&HyperParams::new(20, 1.0, 0.9, 3)).unwrap();
        let eta = gen_signal(&SignalSpec::white_noise(3000, 6)).unwrap();
        let cfg = McConfig {
            n_mc: 40,
            ..McConfig::default()
        };
        let res = memory_capacity(&esn, &eta, &cfg).unwrap();
        assert_eq!(res.r_n.len(), 40);
        assert!(res.r_n.iter().all(|&r| (0.0..=1.0 + 1e-9).contains(&r)));
        assert!(res.mc <= 20.5 && res.mc > 1.0, "mc {}", res.mc);
        assert_relative_eq!(res.partial_sum(40), res.mc, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_configuration() {
        let esn = EchoStateNetwork::<f64>::generate(&HyperParams::new(5, 1.0, 0.9, 3)).unwrap();
        let eta = vec![0.0; 100];
        assert!(memory_capacity(&esn, &eta, &McConfig::default()).is_err());
        let cfg = McConfig {
            lambda: 0.0,
            ..McConfig::default()
        };
        assert!(memory_capacity(&esn, &vec![0.0; 1000], &cfg).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], b in -3.0f64..3.0, seed in 0u64..500) {
            let y = gen_signal(&SignalSpec::white_noise(200, seed)).unwrap();
            let d: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + (i as f64 * 0.3).sin()).collect();
            let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let r0 = determination_coefficient(&y, &d).unwrap();
            let r1 = determination_coefficient(&ya, &d).unwrap();
            prop_assert!((r0 - r1).abs() <= 1e-10);
        }

        #[test]
        fn partial_sums_are_monotone(seed in 0u64..50) {
            let esn = EchoStateNetwork::<f64>::generate(&HyperParams::new(10, 0.8, 0.9, seed)).unwrap();
            let eta = gen_signal(&SignalSpec::white_noise(1200, seed)).unwrap();
            let cfg = McConfig { n_mc: 20, ..McConfig::default() };
            let res = memory_capacity(&esn, &eta, &cfg).unwrap();
            let mut prev = 0.0;
            for n in 1..=20 {
                let s = res.partial_sum(n);
                prop_assert!(s >= prev);
                prev = s;
            }
        }
    }
}
