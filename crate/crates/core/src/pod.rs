//! Proper orthogonal decomposition of reservoir states.
//!
//! Snapshots `X` (one state per column, not mean-centred) are decomposed as
//! `X = U Σ Vᵀ`; the energy contribution of singular value `j` is
//! `ε_j = σ_j / Σ σ_i`, and the basis `T` keeps the leading columns of `U`
//! until the kept energy reaches `1 − cutoff`. The reduced network is
//!
//! ```text
//! z[k+1] = (1 − γ)·z[k] + γ·Tᵀ tanh(W_rr T·z[k] + W_ir·u[k] + W_br)
//! y[k+1] = (W_ro T)·z[k+1]
//! ```
//!
//! `tanh` is still evaluated in the full space; only the state shrinks.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{EsnError, Result};
use crate::esn::{EchoStateNetwork, HyperParams};
use crate::linalg::orthonormality_deviation;
use crate::reservoir::{check_dim, Reservoir};
use crate::scalar::Scalar;

/// Largest tolerated `|TᵀT − I|` entry for a reduction basis.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis<T: Scalar> {
    /// `n × r` left singular vectors, `r = min(n, snapshots)`.
    pub u_svd: DMatrix<T>,
    /// Descending singular values.
    pub sigma: DVector<T>,
    /// `σ_j / Σσ`.
    pub energy: DVector<T>,
}

impl<T: Scalar> PodBasis<T> {
    /// Thin SVD of the snapshot matrix (right singular vectors are not formed).
    ///
    /// With at least as many snapshots as states the left vectors come from the
    /// symmetric eigendecomposition of `X Xᵀ` (method of snapshots, `σ = √λ`);
    /// otherwise a direct SVD of `X` is used. Each column's largest-magnitude
    /// entry is made positive.
    pub fn from_snapshots(x: &DMatrix<T>) -> Result<Self> {
        if x.ncols() == 0 || x.nrows() == 0 {
            return Err(EsnError::InvalidArgument("snapshot matrix is empty".into()));
        }
        if x.iter().any(|v| !v.is_finite_val()) {
            return Err(EsnError::NonFinite("snapshot matrix"));
        }
        let n = x.nrows();
        let (u, sigma) = if x.ncols() >= n {
            let gram = x * x.transpose();
            let eig = gram.symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
            let u = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
            let sigma = DVector::from_fn(n, |j, _| eig.eigenvalues[order[j]].max(T::zero()).sqrt());
            (u, sigma)
        } else {
            let svd = x.clone().svd(true, false);
            let r = svd.singular_values.len();
            let uu = svd.u.expect("left vectors requested");
            let mut order: Vec<usize> = (0..r).collect();
            order.sort_by(|&a, &b| {
                svd.singular_values[b]
                    .partial_cmp(&svd.singular_values[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let u = DMatrix::from_fn(n, r, |i, j| uu[(i, order[j])]);
            let sigma = DVector::from_fn(r, |j, _| svd.singular_values[order[j]]);
            (u, sigma)
        };
        let mut u = u;
        for mut col in u.column_iter_mut() {
            if let Some((idx, _)) = crate::linalg::argmax_abs(col.iter().copied()) {
                if col[idx] < T::zero() {
                    col.neg_mut();
                }
            }
        }
        let total = sigma.iter().fold(T::zero(), |a, &b| a + b);
        let energy = if total > T::zero() {
            sigma.map(|s| s / total)
        } else {
            DVector::zeros(sigma.len())
        };
        Ok(Self { u_svd: u, sigma, energy })
    }

    pub fn n_states(&self) -> usize {
        self.u_svd.nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.u_svd.ncols()
    }

    /// Smallest `m` whose cumulative energy reaches `1 − cutoff` (capped at `r`).
    /// A zero cutoff keeps all `r` columns regardless of rounding in the sum.
    pub fn rank_for_cutoff(&self, cutoff: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&cutoff) {
            return Err(EsnError::InvalidArgument(format!("energy cutoff must lie in [0, 1), got {cutoff}")));
        }
        if cutoff == 0.0 {
            return Ok(self.rank_bound());
        }
        let target = T::of(1.0 - cutoff);
        let mut acc = T::zero();
        for (j, &e) in self.energy.iter().enumerate() {
            acc += e;
            if acc >= target {
                return Ok(j + 1);
            }
        }
        Ok(self.rank_bound())
    }

    /// Sum of the first `m` energy contributions.
    pub fn kept_energy(&self, m: usize) -> T {
        self.energy.rows(0, m.min(self.energy.len())).sum()
    }

    /// First `m` left singular vectors.
    pub fn leading(&self, m: usize) -> Result<DMatrix<T>> {
        if m == 0 || m > self.rank_bound() {
            return Err(EsnError::InvalidArgument(format!(
                "basis size must lie in 1..={}, got {m}",
                self.rank_bound()
            )));
        }
        Ok(self.u_svd.columns(0, m).into_owned())
    }

    /// Energy-based truncation: the `T` matrix for `cutoff`.
    pub fn truncate(&self, cutoff: f64) -> Result<DMatrix<T>> {
        self.leading(self.rank_for_cutoff(cutoff)?)
    }
}

/// POD-reduced echo state network.
#[derive(Debug, Clone, PartialEq)]
pub struct PodEsn<T: Scalar> {
    pub(crate) t: DMatrix<T>,
    pub(crate) w_rr_t: DMatrix<T>,
    pub(crate) w_ir: DMatrix<T>,
    pub(crate) w_br: DVector<T>,
    pub(crate) w_ro_t: DMatrix<T>,
    pub(crate) gamma: T,
    pub(crate) hyper: HyperParams,
    pub(crate) energy_kept: Option<T>,
}

impl<T: Scalar> PodEsn<T> {
    /// Projects `esn` onto the orthonormal columns of `t`.
    pub fn new(esn: &EchoStateNetwork<T>, t: DMatrix<T>) -> Result<Self> {
        check_dim("basis rows", esn.state_dim(), t.nrows())?;
        if t.ncols() == 0 || t.ncols() > t.nrows() {
            return Err(EsnError::InvalidArgument(format!(
                "basis must have between 1 and {} columns, got {}",
                t.nrows(),
                t.ncols()
            )));
        }
        let deviation = orthonormality_deviation(&t).as_f64();
        if !(deviation <= ORTHONORMAL_TOL) {
            return Err(EsnError::NotOrthonormal { deviation });
        }
        Ok(Self {
            w_rr_t: esn.w_rr() * &t,
            w_ro_t: esn.w_ro() * &t,
            w_ir: esn.w_ir().clone(),
            w_br: esn.w_br().clone(),
            gamma: esn.leak_rate(),
            hyper: esn.hyper().clone(),
            energy_kept: None,
            t,
        })
    }

    /// Reduction keeping energy `1 − cutoff` of `basis`.
    pub fn from_cutoff(esn: &EchoStateNetwork<T>, basis: &PodBasis<T>, cutoff: f64) -> Result<Self> {
        let m = basis.rank_for_cutoff(cutoff)?;
        Self::from_rank(esn, basis, m)
    }

    /// Reduction to exactly the leading `m` basis vectors.
    pub fn from_rank(esn: &EchoStateNetwork<T>, basis: &PodBasis<T>, m: usize) -> Result<Self> {
        let mut pe = Self::new(esn, basis.leading(m)?)?;
        pe.energy_kept = Some(basis.kept_energy(m));
        Ok(pe)
    }

    /// Rebuilds a reduced model from stored, already composed parts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        t: DMatrix<T>,
        w_rr_t: DMatrix<T>,
        w_ir: DMatrix<T>,
        w_br: DVector<T>,
        w_ro_t: DMatrix<T>,
        hyper: HyperParams,
        energy_kept: Option<T>,
    ) -> Result<Self> {
        let n = hyper.reservoir_size;
        let m = t.ncols();
        check_dim("T rows", n, t.nrows())?;
        check_dim("W_rr T rows", n, w_rr_t.nrows())?;
        check_dim("W_rr T cols", m, w_rr_t.ncols())?;
        check_dim("w_ir rows", n, w_ir.nrows())?;
        check_dim("w_ir cols", hyper.n_inputs, w_ir.ncols())?;
        check_dim("w_br", n, w_br.len())?;
        check_dim("W_ro T rows", hyper.n_outputs, w_ro_t.nrows())?;
        check_dim("W_ro T cols", m, w_ro_t.ncols())?;
        Ok(Self {
            t,
            w_rr_t,
            w_ir,
            w_br,
            w_ro_t,
            gamma: T::of(hyper.leak_rate),
            hyper,
            energy_kept,
        })
    }

    pub fn reduced_dim(&self) -> usize {
        self.t.ncols()
    }
    pub fn basis(&self) -> &DMatrix<T> {
        &self.t
    }
    pub fn w_rr_t(&self) -> &DMatrix<T> {
        &self.w_rr_t
    }
    pub fn w_ir(&self) -> &DMatrix<T> {
        &self.w_ir
    }
    pub fn w_br(&self) -> &DVector<T> {
        &self.w_br
    }
    pub fn w_ro_t(&self) -> &DMatrix<T> {
        &self.w_ro_t
    }
    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }
    pub fn energy_kept(&self) -> Option<T> {
        self.energy_kept
    }

    /// Copy with a readout fitted directly on reduced states (`output × m`).
    pub fn with_readout(&self, w_ro_t: DMatrix<T>) -> Result<Self> {
        check_dim("readout rows", self.hyper.n_outputs, w_ro_t.nrows())?;
        check_dim("readout cols", self.reduced_dim(), w_ro_t.ncols())?;
        Ok(Self {
            w_ro_t,
            ..self.clone()
        })
    }

    /// `z = Tᵀx`.
    pub fn project(&self, x: &DVector<T>) -> Result<DVector<T>> {
        check_dim("full state", self.t.nrows(), x.len())?;
        Ok(self.t.tr_mul(x))
    }

    /// `x = Tz`.
    pub fn lift(&self, z: &DVector<T>) -> Result<DVector<T>> {
        check_dim("reduced state", self.t.ncols(), z.len())?;
        Ok(&self.t * z)
    }

    /// Full-space pre-activation `W_rr T z + W_ir u + W_br`.
    pub fn preactivation(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_dim("reduced state", self.reduced_dim(), z.len())?;
        check_dim("input", self.hyper.n_inputs, u.len())?;
        Ok(&self.w_rr_t * z + &self.w_ir * u + &self.w_br)
    }
}

impl<T: Scalar> Reservoir<T> for PodEsn<T> {
    fn state_dim(&self) -> usize {
        self.t.ncols()
    }
    fn input_dim(&self) -> usize {
        self.hyper.n_inputs
    }
    fn output_dim(&self) -> usize {
        self.hyper.n_outputs
    }
    fn tanh_nodes(&self) -> usize {
        self.t.nrows()
    }
    fn leak_rate(&self) -> T {
        self.gamma
    }
    fn readout_matrix(&self) -> &DMatrix<T> {
        &self.w_ro_t
    }

    fn advance(&self, state: &DVector<T>, input: DVectorView<'_, T>, pre: &mut DVector<T>, next: &mut DVector<T>) {
        pre.copy_from(&self.w_br);
        pre.gemv(T::one(), &self.w_rr_t, state, T::one());
        pre.gemv(T::one(), &self.w_ir, &input, T::one());
        pre.apply(|v| *v = v.tanh());
        // next ← Tᵀ·tanh(...), then blend in place
        next.gemv_tr(T::one(), &self.t, pre, T::zero());
        let keep = T::one() - self.gamma;
        for (n, &s) in next.iter_mut().zip(state.iter()) {
            *n = keep * s + self.gamma * *n;
        }
    }
}
