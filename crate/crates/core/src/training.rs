//! Readout training: state harvesting, ridge regression and R² scoring.

use std::io::Read;
use std::ops::Range;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EsnError, Result};
use crate::esn::EchoStateNetwork;
use crate::reservoir::{check_dim, Reservoir};
use crate::scalar::Scalar;

/// Steps discarded before fitting when nothing else is configured.
pub const DEFAULT_WASHOUT: usize = 200;
/// Ridge parameter used when there is no validation split to tune on.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

/// Decades 1e-9 ..= 1e-1 searched during validation.
pub fn default_lambda_grid() -> Vec<f64> {
    (-9..=-1).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    Fixed(f64),
    /// Pick the candidate with the best mean validation R²; falls back to
    /// [`DEFAULT_LAMBDA`] when the dataset has no validation split.
    Validate(Vec<f64>),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Validate(default_lambda_grid())
    }
}

/// Input/target sequences with column-index split points.
///
/// Columns `[0, train_end)` train, `[train_end, val_end)` validate and
/// `[val_end, K)` test.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    pub inputs: DMatrix<T>,
    pub targets: DMatrix<T>,
    pub train_end: usize,
    pub val_end: usize,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(inputs: DMatrix<T>, targets: DMatrix<T>, train_end: usize, val_end: usize) -> Result<Self> {
        let input_names = (0..inputs.nrows()).map(|i| format!("u{i}")).collect();
        let output_names = (0..targets.nrows()).map(|i| format!("y{i}")).collect();
        let ds = Self {
            inputs,
            targets,
            train_end,
            val_end,
            input_names,
            output_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.ncols() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.inputs.ncols();
        if self.targets.ncols() != k {
            return Err(EsnError::InvalidDataset(format!(
                "inputs have {k} steps but targets have {}",
                self.targets.ncols()
            )));
        }
        if !(0 < self.train_end && self.train_end <= self.val_end && self.val_end <= k) {
            return Err(EsnError::InvalidDataset(format!(
                "split must satisfy 0 < train_end <= val_end <= K, got ({}, {}) with K = {k}",
                self.train_end, self.val_end
            )));
        }
        if self.inputs.iter().chain(self.targets.iter()).any(|v| !v.is_finite_val()) {
            return Err(EsnError::NonFinite("dataset"));
        }
        Ok(())
    }

    pub fn with_split(mut self, train_end: usize, val_end: usize) -> Result<Self> {
        self.train_end = train_end;
        self.val_end = val_end;
        self.validate()?;
        Ok(self)
    }

    pub fn load_csv(path: impl AsRef<Path>, train_end: usize, val_end: usize) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| EsnError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file, train_end, val_end)
    }

    /// Reads a CSV with a header row; columns named `in:<name>` become inputs
    /// and `out:<name>` targets, everything else is ignored. One row per step.
    pub fn from_csv_reader<R: Read>(reader: R, train_end: usize, val_end: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut in_cols = Vec::new();
        let mut out_cols = Vec::new();
        for (i, h) in headers.iter().enumerate() {
            if let Some(name) = h.strip_prefix("in:") {
                in_cols.push((i, name.to_string()));
            } else if let Some(name) = h.strip_prefix("out:") {
                out_cols.push((i, name.to_string()));
            }
        }
        if in_cols.is_empty() || out_cols.is_empty() {
            return Err(EsnError::InvalidDataset(
                "header needs at least one `in:` and one `out:` column".into(),
            ));
        }
        let mut ins: Vec<Vec<T>> = vec![Vec::new(); in_cols.len()];
        let mut outs: Vec<Vec<T>> = vec![Vec::new(); out_cols.len()];
        for (row_idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |col: usize| -> Result<T> {
                let raw = rec.get(col).unwrap_or("");
                raw.parse::<f64>().map(T::of).map_err(|_| {
                    EsnError::InvalidDataset(format!("row {}: cannot parse {raw:?} in column {col}", row_idx + 2))
                })
            };
            for (slot, (col, _)) in ins.iter_mut().zip(&in_cols) {
                slot.push(parse(*col)?);
            }
            for (slot, (col, _)) in outs.iter_mut().zip(&out_cols) {
                slot.push(parse(*col)?);
            }
        }
        let k = ins[0].len();
        let inputs = DMatrix::from_fn(ins.len(), k, |i, j| ins[i][j]);
        let targets = DMatrix::from_fn(outs.len(), k, |i, j| outs[i][j]);
        let ds = Self {
            inputs,
            targets,
            train_end,
            val_end,
            input_names: in_cols.into_iter().map(|(_, n)| n).collect(),
            output_names: out_cols.into_iter().map(|(_, n)| n).collect(),
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub lambda: f64,
    pub washout: usize,
    /// `None` marks an output whose truth has zero variance on that split.
    pub train_r2: Vec<Option<f64>>,
    pub val_r2: Vec<Option<f64>>,
    pub test_r2: Vec<Option<f64>>,
}

/// Coefficient of determination `1 − SS_res / SS_tot`; `None` when the truth
/// has zero variance (which includes fewer than two points).
pub fn r2_score<T: Scalar>(pred: &[T], truth: &[T]) -> Option<T> {
    if pred.len() != truth.len() || truth.len() < 2 {
        return None;
    }
    let n = T::from_usize(truth.len())?;
    let mean = truth.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mut ss_tot = T::zero();
    let mut ss_res = T::zero();
    for (&p, &t) in pred.iter().zip(truth) {
        ss_tot += (t - mean) * (t - mean);
        ss_res += (t - p) * (t - p);
    }
    if ss_tot == T::zero() {
        return None;
    }
    Some(T::one() - ss_res / ss_tot)
}

/// Solves `(XᵀX + λI)·W = XᵀD` for `W` (`N × n_outputs`), with `X` as
/// `K × N` rows-of-states and `D` as `K × n_outputs`.
pub fn ridge_fit<T: Scalar>(x: &DMatrix<T>, d: &DMatrix<T>, lambda: T) -> Result<DMatrix<T>> {
    check_dim("ridge target rows", x.nrows(), d.nrows())?;
    if x.nrows() == 0 {
        return Err(EsnError::InvalidArgument("ridge regression needs at least one row".into()));
    }
    let gram = x.tr_mul(x);
    let rhs = x.tr_mul(d);
    solve_regularized(&gram, &rhs, lambda)
}

/// Readout `W_ro` (`n_outputs × N`) from column-per-step states and targets.
pub fn ridge_from_states<T: Scalar>(states: &DMatrix<T>, targets: &DMatrix<T>, lambda: T) -> Result<DMatrix<T>> {
    check_dim("ridge target steps", states.ncols(), targets.ncols())?;
    let gram = states * states.transpose();
    let rhs = states * targets.transpose();
    Ok(solve_regularized(&gram, &rhs, lambda)?.transpose())
}

/// Cholesky solve of `(G + λI)·W = B` with a conditioning check at `λ = 0`.
pub fn solve_regularized<T: Scalar>(gram: &DMatrix<T>, rhs: &DMatrix<T>, lambda: T) -> Result<DMatrix<T>> {
    if lambda < T::zero() || !lambda.is_finite_val() {
        return Err(EsnError::InvalidArgument("ridge lambda must be finite and non-negative".into()));
    }
    let n = gram.nrows();
    let mut a = gram.clone();
    for i in 0..n {
        a[(i, i)] += lambda;
    }
    let unregularized = lambda == T::zero();
    match Cholesky::new(a.clone()) {
        Some(chol) => {
            if unregularized {
                let diag = chol.l_dirty().diagonal();
                let (lo, hi) = diag.iter().fold((T::max_value().unwrap(), T::zero()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                let rcond = (lo / hi) * (lo / hi);
                if !(rcond > T::default_epsilon() * T::of(n as f64)) {
                    return Err(EsnError::SingularRidge);
                }
            }
            let mut w = chol.solve(rhs);
            // one step of iterative refinement
            let resid = rhs - &a * &w;
            w += chol.solve(&resid);
            Ok(w)
        }
        None if unregularized => Err(EsnError::SingularRidge),
        None => a
            .lu()
            .solve(rhs)
            .ok_or_else(|| EsnError::InvalidArgument("regularized normal equations are singular".into())),
    }
}

/// Ridge fits sharing one Gram matrix across many right-hand sides.
pub struct RidgeSystem<T: Scalar> {
    chol: Cholesky<T, nalgebra::Dyn>,
}

impl<T: Scalar> RidgeSystem<T> {
    pub fn new(states: &DMatrix<T>, lambda: T) -> Result<Self> {
        if lambda <= T::zero() {
            return Err(EsnError::InvalidArgument("shared ridge systems need lambda > 0".into()));
        }
        let mut a = states * states.transpose();
        for i in 0..a.nrows() {
            a[(i, i)] += lambda;
        }
        let chol = Cholesky::new(a)
            .ok_or_else(|| EsnError::InvalidArgument("regularized normal equations are not positive definite".into()))?;
        Ok(Self { chol })
    }

    /// Weights (`N × n_rhs`) for the right-hand sides `Xᵀ·D` given directly.
    pub fn solve(&self, rhs: &DMatrix<T>) -> DMatrix<T> {
        self.chol.solve(rhs)
    }
}

fn range_r2<T: Scalar>(outputs: &DMatrix<T>, targets: &DMatrix<T>, range: Range<usize>) -> Vec<Option<f64>> {
    (0..targets.nrows())
        .map(|o| {
            let p: Vec<T> = outputs.row(o).columns_range(range.clone()).iter().copied().collect();
            let t: Vec<T> = targets.row(o).columns_range(range.clone()).iter().copied().collect();
            r2_score(&p, &t).map(|v| v.as_f64())
        })
        .collect()
}

fn mean_score(r2: &[Option<f64>]) -> f64 {
    if r2.is_empty() {
        return f64::NEG_INFINITY;
    }
    r2.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).sum::<f64>() / r2.len() as f64
}

/// Drives `esn` with the whole input sequence from the zero state, fits the
/// readout on the training split after `washout`, and scores every split from
/// the same free run.
///
/// With a validation split and [`Regularization::Validate`], each candidate is
/// fitted on `[washout, train_end)` and scored on `[train_end, val_end)`; the
/// winner is refitted on `[washout, val_end)`.
pub fn train_readout<T: Scalar>(
    esn: &EchoStateNetwork<T>,
    data: &Dataset<T>,
    washout: usize,
    reg: &Regularization,
) -> Result<(EchoStateNetwork<T>, FitReport)> {
    let (w_ro, report) = fit_readout(esn, data, washout, reg)?;
    Ok((esn.with_readout(w_ro)?, report))
}

/// [`train_readout`] for any model: returns the fitted `output × state`
/// readout instead of installing it.
pub fn fit_readout<T: Scalar, M: Reservoir<T> + ?Sized>(
    esn: &M,
    data: &Dataset<T>,
    washout: usize,
    reg: &Regularization,
) -> Result<(DMatrix<T>, FitReport)> {
    data.validate()?;
    check_dim("dataset inputs", esn.input_dim(), data.inputs.nrows())?;
    check_dim("dataset targets", esn.output_dim(), data.targets.nrows())?;
    if washout >= data.train_end {
        return Err(EsnError::InvalidArgument(format!(
            "washout ({washout}) must be smaller than the training split ({})",
            data.train_end
        )));
    }
    let states = esn.run_states(&data.inputs, &esn.zero_state())?;
    let k = data.len();
    let has_val = data.val_end > data.train_end;

    let (lambda, val_r2) = match reg {
        Regularization::Fixed(l) => (*l, Vec::new()),
        Regularization::Validate(grid) if has_val && !grid.is_empty() => {
            let tr = washout..data.train_end;
            let s_tr = states.columns_range(tr.clone()).into_owned();
            let d_tr = data.targets.columns_range(tr).into_owned();
            let gram = &s_tr * s_tr.transpose();
            let rhs = &s_tr * d_tr.transpose();
            let s_val = states.columns_range(data.train_end..data.val_end).into_owned();
            let d_val = data.targets.columns_range(data.train_end..data.val_end).into_owned();
            let scored: Vec<(f64, Vec<Option<f64>>)> = grid
                .par_iter()
                .filter_map(|&l| {
                    let w = solve_regularized(&gram, &rhs, T::of(l)).ok()?;
                    let pred = w.transpose() * &s_val;
                    Some((l, range_r2(&pred, &d_val, 0..d_val.ncols())))
                })
                .collect();
            let best = scored
                .into_iter()
                .fold(None::<(f64, Vec<Option<f64>>)>, |best, cand| match best {
                    Some(b) if mean_score(&b.1) >= mean_score(&cand.1) => Some(b),
                    _ => Some(cand),
                })
                .ok_or(EsnError::SingularRidge)?;
            best
        }
        Regularization::Validate(_) => (DEFAULT_LAMBDA, Vec::new()),
    };

    let fit_end = if matches!(reg, Regularization::Validate(_)) && has_val {
        data.val_end
    } else {
        data.train_end
    };
    let fit = washout..fit_end;
    let w_ro = ridge_from_states(
        &states.columns_range(fit.clone()).into_owned(),
        &data.targets.columns_range(fit.clone()).into_owned(),
        T::of(lambda),
    )?;
    let outputs = &w_ro * &states;
    let report = FitReport {
        lambda,
        washout,
        train_r2: range_r2(&outputs, &data.targets, fit),
        val_r2,
        test_r2: if data.val_end < k {
            range_r2(&outputs, &data.targets, data.val_end..k)
        } else {
            Vec::new()
        },
    };
    Ok((w_ro, report))
}

/// Runs any model over the dataset inputs from `initial` and returns
/// per-output R² on `range`.
pub fn evaluate_r2<T: Scalar, M: Reservoir<T> + ?Sized>(
    model: &M,
    data: &Dataset<T>,
    initial: &DVector<T>,
    range: Range<usize>,
) -> Result<Vec<Option<f64>>> {
    check_dim("dataset inputs", model.input_dim(), data.inputs.nrows())?;
    check_dim("dataset targets", model.output_dim(), data.targets.nrows())?;
    if range.end > data.len() {
        return Err(EsnError::InvalidArgument("evaluation range exceeds dataset".into()));
    }
    let traj = model.run(&data.inputs, initial)?;
    Ok(range_r2(&traj.outputs, &data.targets, range))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::HyperParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    /// (XᵀX + λI)⁻¹XᵀD through an explicit inverse.
    fn explicit_ridge(x: &DMatrix<f64>, d: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
        let n = x.ncols();
        let a = x.transpose() * x + DMatrix::identity(n, n) * lambda;
        a.try_inverse().unwrap() * x.transpose() * d
    }

    #[test]
    fn identity_design_examples() {
        let x = DMatrix::<f64>::identity(2, 2);
        let d = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let w = ridge_fit(&x, &d, 0.0).unwrap();
        assert_relative_eq!(w, d.clone(), epsilon = 1e-14);
        let w = ridge_fit(&x, &d, 1.0).unwrap();
        assert_relative_eq!(w, DMatrix::from_column_slice(2, 1, &[0.5, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn matches_explicit_inverse_on_random_problem() {
        let x = lcg_matrix(50, 8, 1);
        let d = lcg_matrix(50, 2, 2);
        let w = ridge_fit(&x, &d, 0.1).unwrap();
        assert_relative_eq!(w, explicit_ridge(&x, &d, 0.1), epsilon = 1e-8);
        // normal-equation residual
        let a = x.transpose() * &x + DMatrix::identity(8, 8) * 0.1;
        let b = x.transpose() * &d;
        assert!((a * &w - &b).norm() <= 1e-8 * b.norm());
    }

    #[test]
    fn singular_unregularized_system_is_reported() {
        let mut x = lcg_matrix(10, 3, 4);
        x.set_column(2, &x.column(0).clone_owned());
        let d = lcg_matrix(10, 1, 5);
        assert_eq!(ridge_fit(&x, &d, 0.0).unwrap_err(), EsnError::SingularRidge);
        assert!(ridge_fit(&x, &d, 1e-3).is_ok());
    }

    #[test]
    fn r2_examples() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(r2_score(&t, &t), Some(1.0));
        assert_eq!(r2_score(&[1.0, 1.0, 1.0], &t), Some(0.0));
        assert_eq!(r2_score(&[0.0, 1.0, 1.0], &t), Some(0.5));
        assert_eq!(r2_score(&[0.0, 1.0, 1.0], &[2.0, 2.0, 2.0]), None);
        assert_eq!(r2_score(&[1.0], &[1.0]), None);
    }

    fn small_esn(n: usize, seed: u64) -> EchoStateNetwork<f64> {
        let mut hp = HyperParams::new(n, 0.8, 0.9, seed);
        hp.input_scaling = 0.8;
        EchoStateNetwork::generate(&hp).unwrap()
    }

    fn sine_inputs(k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(1, k, |_, j| (j as f64 * 0.21).sin() + 0.5 * (j as f64 * 0.077).cos())
    }

    #[test]
    fn zero_targets_give_zero_readout_and_undefined_r2() {
        let esn = small_esn(20, 1);
        let data = Dataset::new(sine_inputs(300), DMatrix::zeros(1, 300), 200, 200).unwrap();
        let (trained, report) = train_readout(&esn, &data, 50, &Regularization::Fixed(1e-6)).unwrap();
        assert!(trained.w_ro().iter().all(|&v| v == 0.0));
        assert_eq!(report.train_r2, vec![None]);
        assert_eq!(report.test_r2, vec![None]);
    }

    #[test]
    fn planted_readout_is_recovered() {
        let esn = small_esn(30, 2);
        let inputs = sine_inputs(600);
        let states = esn.run_states(&inputs, &DVector::zeros(30)).unwrap();
        let planted = DMatrix::from_fn(1, 30, |_, j| ((j * 13) as f64).sin());
        let targets = &planted * &states;
        let data = Dataset::new(inputs, targets, 400, 400).unwrap();
        let (trained, report) = train_readout(&esn, &data, 20, &Regularization::Fixed(1e-12)).unwrap();
        assert!(report.train_r2[0].unwrap() >= 1.0 - 1e-6);
        assert!(report.test_r2[0].unwrap() >= 1.0 - 1e-6);
        assert_eq!(trained.w_rr(), esn.w_rr());
        assert_eq!(trained.w_ir(), esn.w_ir());
        assert_eq!(trained.w_br(), esn.w_br());
    }

    #[test]
    fn washout_must_precede_training_end() {
        let esn = small_esn(5, 3);
        let data = Dataset::new(sine_inputs(100), DMatrix::zeros(1, 100), 50, 50).unwrap();
        assert!(matches!(
            train_readout(&esn, &data, 50, &Regularization::Fixed(1e-6)),
            Err(EsnError::InvalidArgument(_))
        ));
    }

    #[test]
    fn validation_grid_picks_a_candidate_and_reports_it() {
        let esn = small_esn(25, 4);
        let inputs = sine_inputs(800);
        let targets = DMatrix::from_fn(1, 800, |_, j| if j >= 3 { inputs[(0, j - 3)] } else { 0.0 });
        let data = Dataset::new(inputs, targets, 400, 600).unwrap();
        let grid = default_lambda_grid();
        let (_, report) = train_readout(&esn, &data, 50, &Regularization::Validate(grid.clone())).unwrap();
        assert!(grid.contains(&report.lambda));
        assert_eq!(report.val_r2.len(), 1);
        // without a validation split the default lambda is used
        let data = data.with_split(600, 600).unwrap();
        let (_, report) = train_readout(&esn, &data, 50, &Regularization::Validate(grid)).unwrap();
        assert_eq!(report.lambda, DEFAULT_LAMBDA);
    }

    #[test]
    fn csv_ingestion_maps_tagged_columns() {
        let text = "time,in:u,out:y,in:v\n0,1.0,2.0,3.0\n1,4.0,5.0,6.0\n2,7.0,8.0,9.0\n";
        let ds = Dataset::<f64>::from_csv_reader(text.as_bytes(), 2, 2).unwrap();
        assert_eq!(ds.input_names, vec!["u", "v"]);
        assert_eq!(ds.output_names, vec!["y"]);
        assert_eq!(ds.inputs, DMatrix::from_row_slice(2, 3, &[1.0, 4.0, 7.0, 3.0, 6.0, 9.0]));
        assert_eq!(ds.targets, DMatrix::from_row_slice(1, 3, &[2.0, 5.0, 8.0]));
        assert!(Dataset::<f64>::from_csv_reader("a,b\n1,2\n".as_bytes(), 1, 1).is_err());
        assert!(Dataset::<f64>::from_csv_reader("in:a,out:b\n1,x\n".as_bytes(), 1, 1).is_err());
        assert!(Dataset::<f64>::from_csv_reader(text.as_bytes(), 0, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn ridge_matches_explicit_inverse(k in 1usize..30, n in 1usize..30, seed in 0u64..1000, lexp in -4i32..1) {
            let x = lcg_matrix(k, n, seed);
            let d = lcg_matrix(k, 1, seed + 7);
            let lambda = 10f64.powi(lexp);
            let w = ridge_fit(&x, &d, lambda).unwrap();
            let oracle = explicit_ridge(&x, &d, lambda);
            prop_assert!((w - oracle).amax() <= 1e-8);
        }

        #[test]
        fn ridge_shrinks_with_lambda(seed in 0u64..1000, l1 in 1e-6f64..1.0, factor in 1.0f64..100.0) {
            let x = lcg_matrix(20, 6, seed);
            let d = lcg_matrix(20, 2, seed + 1);
            let w1 = ridge_fit(&x, &d, l1).unwrap();
            let w2 = ridge_fit(&x, &d, l1 * factor).unwrap();
            prop_assert!(w2.norm() <= w1.norm() + 1e-12);
        }
    }

    #[test]
    fn huge_lambda_drives_weights_to_zero() {
        let x = lcg_matrix(40, 10, 9);
        let d = lcg_matrix(40, 1, 10);
        let w = ridge_fit(&x, &d, 1e12).unwrap();
        assert!(w.norm() <= 1e-6 * (x.transpose() * d).norm());
    }
}
