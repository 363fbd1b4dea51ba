//! Discrete empirical interpolation on top of a POD-reduced network.
//!
//! The nonlinearity `f(Tz)` is approximated by `U (PᵀU)⁻¹ Pᵀ f(Tz)`, where
//! `U` holds leading left singular vectors of the same snapshot SVD that
//! produced `T` (truncated at its own cutoff) and `P` selects `m_d` pivot
//! rows. Because `tanh` acts elementwise, `Pᵀ f(v) = f(Pᵀ v)`, so a step needs
//! only `m_d` activations:
//!
//! ```text
//! z[k+1] = (1 − γ)·z[k] + γ·(Tᵀ T₂)·tanh(PᵀW_rr T·z[k] + PᵀW_ir·u[k] + PᵀW_br)
//! T₂ = U (PᵀU)⁻¹
//! ```

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, DVectorView, LU};
use serde::Serialize;

use crate::error::{EsnError, Result};
use crate::linalg::argmax_abs;
use crate::pod::{PodBasis, PodEsn};
use crate::reservoir::{check_dim, Reservoir};
use crate::scalar::Scalar;

/// Greedy DEIM pivot selection.
///
/// The first pivot is the largest-magnitude entry of `u₁`. For each further
/// column `u_l`, the coefficients `c` solving `(PᵀŨ_l)c = Pᵀu_l` are computed,
/// and the next pivot is the largest entry of the residual `u_l − Ũ_l c`.
/// `PᵀŨ_l` is kept as an LU factorization that grows by one row and column
/// per step, so each solve costs `O(l²)`. Ties pick the lowest row index.
pub fn deim_select<T: Scalar>(u: &DMatrix<T>) -> Result<Vec<usize>> {
    let (n, md) = u.shape();
    if md == 0 || md > n {
        return Err(EsnError::InvalidArgument(format!(
            "DEIM basis must have between 1 and {n} columns, got {md}"
        )));
    }
    let tiny = |col: usize| {
        let scale = u.column(col).amax();
        T::default_epsilon() * T::of(100.0) * scale
    };
    let mut pivots = Vec::with_capacity(md);
    let mut lower = DMatrix::<T>::zeros(md, md);
    let mut upper = DMatrix::<T>::zeros(md, md);

    let (p0, v0) = argmax_abs(u.column(0).iter().copied()).expect("non-empty column");
    if !(v0 > tiny(0)) {
        return Err(EsnError::SingularInterpolation { column: 0 });
    }
    pivots.push(p0);
    lower[(0, 0)] = T::one();
    upper[(0, 0)] = u[(p0, 0)];

    let mut y = vec![T::zero(); md];
    let mut c = DVector::<T>::zeros(md);
    let mut resid = DVector::<T>::zeros(n);
    for l in 1..md {
        // L y = Pᵀ u_l
        for i in 0..l {
            let mut acc = u[(pivots[i], l)];
            for j in 0..i {
                acc -= lower[(i, j)] * y[j];
            }
            y[i] = acc;
        }
        // U c = y
        for i in (0..l).rev() {
            let mut acc = y[i];
            for j in i + 1..l {
                acc -= upper[(i, j)] * c[j];
            }
            c[i] = acc / upper[(i, i)];
        }
        resid.copy_from(&u.column(l));
        resid.gemv(-T::one(), &u.columns(0, l), &c.rows(0, l), T::one());
        let (p, v) = argmax_abs(resid.iter().copied()).expect("non-empty column");
        if !(v > tiny(l)) || pivots.contains(&p) {
            return Err(EsnError::SingularInterpolation { column: l });
        }
        // extend the factorization with row p and column l
        for j in 0..l {
            let mut acc = u[(p, j)];
            for i in 0..j {
                acc -= lower[(l, i)] * upper[(i, j)];
            }
            lower[(l, j)] = acc / upper[(j, j)];
        }
        lower[(l, l)] = T::one();
        let mut corner = u[(p, l)];
        for i in 0..l {
            upper[(i, l)] = y[i];
            corner -= lower[(l, i)] * y[i];
        }
        upper[(l, l)] = corner;
        pivots.push(p);
    }
    Ok(pivots)
}

/// Constants of the ℓ₂ error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeimErrorBound {
    /// `‖(PᵀU)⁻¹‖₂ · ‖(I − UUᵀ)f‖₂`, the bound that dominates the true error.
    pub bound: f64,
    /// The same product with `‖PᵀU‖₂` in place of the inverse norm.
    pub bound_forward_norm: f64,
    /// `‖(I − UUᵀ)f‖₂`.
    pub projection_residual: f64,
    pub inv_norm: f64,
    pub forward_norm: f64,
    /// `(1 + √(2n))^(m_d − 1) / ‖u₁‖_∞`; may overflow to infinity.
    pub a_priori_cap: f64,
}

/// DEIM basis, pivots and the interpolation operator `T₂ = U (PᵀU)⁻¹`.
#[derive(Debug, Clone)]
pub struct DeimOperators<T: Scalar> {
    u: DMatrix<T>,
    pivots: Vec<usize>,
    pu: DMatrix<T>,
    pu_lu: LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    t2: DMatrix<T>,
    norms: OnceLock<(f64, f64)>,
}

impl<T: Scalar> DeimOperators<T> {
    pub fn new(u: DMatrix<T>) -> Result<Self> {
        let pivots = deim_select(&u)?;
        Self::with_pivots(u, pivots)
    }

    /// Builds the operators for externally supplied pivots (e.g. a loaded file).
    pub fn with_pivots(u: DMatrix<T>, pivots: Vec<usize>) -> Result<Self> {
        let md = u.ncols();
        check_dim("pivot count", md, pivots.len())?;
        let mut seen = vec![false; u.nrows()];
        for &p in &pivots {
            if p >= u.nrows() || std::mem::replace(&mut seen[p], true) {
                return Err(EsnError::InvalidArgument(format!("invalid or repeated pivot {p}")));
            }
        }
        let pu = gather_rows(&u, &pivots);
        let pu_lu = pu.clone().lu();
        if !pu_lu.is_invertible() {
            return Err(EsnError::SingularInterpolation { column: md - 1 });
        }
        // T₂ᵀ = (PᵀU)⁻ᵀ Uᵀ
        let t2t = pu
            .transpose()
            .lu()
            .solve(&u.transpose())
            .ok_or(EsnError::SingularInterpolation { column: md - 1 })?;
        Ok(Self {
            t2: t2t.transpose(),
            u,
            pivots,
            pu,
            pu_lu,
            norms: OnceLock::new(),
        })
    }

    pub fn basis(&self) -> &DMatrix<T> {
        &self.u
    }
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }
    pub fn t2(&self) -> &DMatrix<T> {
        &self.t2
    }
    /// `PᵀU` (`m_d × m_d`).
    pub fn pivoted_basis(&self) -> &DMatrix<T> {
        &self.pu
    }
    pub fn n_points(&self) -> usize {
        self.pivots.len()
    }

    /// Interpolation coefficients `c = (PᵀU)⁻¹ Pᵀf`.
    pub fn coefficients(&self, f: &DVector<T>) -> Result<DVector<T>> {
        check_dim("function vector", self.u.nrows(), f.len())?;
        let pf = DVector::from_iterator(self.pivots.len(), self.pivots.iter().map(|&p| f[p]));
        self.pu_lu
            .solve(&pf)
            .ok_or(EsnError::SingularInterpolation { column: self.pivots.len() - 1 })
    }

    /// DEIM approximation `U (PᵀU)⁻¹ Pᵀf`.
    pub fn interpolate(&self, f: &DVector<T>) -> Result<DVector<T>> {
        Ok(&self.u * self.coefficients(f)?)
    }

    /// `(‖PᵀU‖₂, ‖(PᵀU)⁻¹‖₂)`, computed once.
    pub fn pivot_norms(&self) -> (f64, f64) {
        *self.norms.get_or_init(|| {
            let sv = self.pu.clone().singular_values();
            let hi = sv.iter().fold(T::zero(), |a, &b| a.max(b)).as_f64();
            let lo = sv.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b)).as_f64();
            (hi, 1.0 / lo)
        })
    }

    /// Error bound for approximating `f` (the caller supplies `f`, typically
    /// `tanh` of a pre-activation).
    pub fn error_bound(&self, f: &DVector<T>) -> Result<DeimErrorBound> {
        check_dim("function vector", self.u.nrows(), f.len())?;
        let proj = &self.u * self.u.tr_mul(f);
        let residual = (f - proj).norm().as_f64();
        let (forward_norm, inv_norm) = self.pivot_norms();
        let n = self.u.nrows() as f64;
        let u1_inf = self.u.column(0).amax().as_f64();
        let a_priori_cap = (1.0 + (2.0 * n).sqrt()).powi(self.pivots.len() as i32 - 1) / u1_inf;
        Ok(DeimErrorBound {
            bound: inv_norm * residual,
            bound_forward_norm: forward_norm * residual,
            projection_residual: residual,
            inv_norm,
            forward_norm,
            a_priori_cap,
        })
    }
}

pub(crate) fn gather_rows<T: Scalar>(m: &DMatrix<T>, rows: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// POD-DEIM reduced echo state network.
#[derive(Debug, Clone)]
pub struct DeimEsn<T: Scalar> {
    base: PodEsn<T>,
    ops: DeimOperators<T>,
    deim_cutoff: Option<f64>,
    lift: DMatrix<T>,
    w_rr_t_piv: DMatrix<T>,
    w_ir_piv: DMatrix<T>,
    w_br_piv: DVector<T>,
}

impl<T: Scalar> DeimEsn<T> {
    /// Interpolates `pe` with the leading columns of `basis` reaching energy
    /// `1 − deim_cutoff`. `basis` must be the decomposition `pe` was cut from.
    pub fn build(pe: &PodEsn<T>, basis: &PodBasis<T>, deim_cutoff: f64) -> Result<Self> {
        check_dim("DEIM basis rows", pe.basis().nrows(), basis.n_states())?;
        let md = basis.rank_for_cutoff(deim_cutoff)?;
        let ops = DeimOperators::new(basis.leading(md)?)?;
        let mut de = Self::from_operators(pe, ops)?;
        de.deim_cutoff = Some(deim_cutoff);
        Ok(de)
    }

    pub fn from_operators(pe: &PodEsn<T>, ops: DeimOperators<T>) -> Result<Self> {
        check_dim("DEIM basis rows", pe.basis().nrows(), ops.basis().nrows())?;
        let piv = ops.pivots();
        Ok(Self {
            lift: pe.basis().tr_mul(ops.t2()),
            w_rr_t_piv: gather_rows(pe.w_rr_t(), piv),
            w_ir_piv: gather_rows(pe.w_ir(), piv),
            w_br_piv: DVector::from_iterator(piv.len(), piv.iter().map(|&p| pe.w_br()[p])),
            base: pe.clone(),
            ops,
            deim_cutoff: None,
        })
    }

    pub fn with_cutoff_label(mut self, deim_cutoff: Option<f64>) -> Self {
        self.deim_cutoff = deim_cutoff;
        self
    }

    pub fn base(&self) -> &PodEsn<T> {
        &self.base
    }
    pub fn operators(&self) -> &DeimOperators<T> {
        &self.ops
    }
    pub fn deim_cutoff(&self) -> Option<f64> {
        self.deim_cutoff
    }
    pub fn n_points(&self) -> usize {
        self.ops.n_points()
    }
    /// `TᵀT₂` (`m × m_d`).
    pub fn lift(&self) -> &DMatrix<T> {
        &self.lift
    }
    /// `PᵀW_rr T` (`m_d × m`).
    pub fn w_rr_t_piv(&self) -> &DMatrix<T> {
        &self.w_rr_t_piv
    }
    pub fn w_ir_piv(&self) -> &DMatrix<T> {
        &self.w_ir_piv
    }
    pub fn w_br_piv(&self) -> &DVector<T> {
        &self.w_br_piv
    }

    /// Pivoted pre-activation `PᵀW_rr T z + PᵀW_ir u + PᵀW_br`.
    pub fn preactivation(&self, z: &DVector<T>, u: &DVector<T>) -> Result<DVector<T>> {
        check_dim("reduced state", self.base.reduced_dim(), z.len())?;
        check_dim("input", self.base.hyper().n_inputs, u.len())?;
        Ok(&self.w_rr_t_piv * z + &self.w_ir_piv * u + &self.w_br_piv)
    }
}

impl<T: Scalar> Reservoir<T> for DeimEsn<T> {
    fn state_dim(&self) -> usize {
        self.base.reduced_dim()
    }
    fn input_dim(&self) -> usize {
        self.base.hyper().n_inputs
    }
    fn output_dim(&self) -> usize {
        self.base.hyper().n_outputs
    }
    fn tanh_nodes(&self) -> usize {
        self.ops.n_points()
    }
    fn leak_rate(&self) -> T {
        self.base.leak_rate()
    }
    fn readout_matrix(&self) -> &DMatrix<T> {
        self.base.w_ro_t()
    }

    fn advance(&self, state: &DVector<T>, input: DVectorView<'_, T>, pre: &mut DVector<T>, next: &mut DVector<T>) {
        pre.copy_from(&self.w_br_piv);
        pre.gemv(T::one(), &self.w_rr_t_piv, state, T::one());
        pre.gemv(T::one(), &self.w_ir_piv, &input, T::one());
        pre.apply(|v| *v = v.tanh());
        let gamma = self.leak_rate();
        next.copy_from(state);
        next.gemv(gamma, &self.lift, pre, T::one() - gamma);
    }
}
