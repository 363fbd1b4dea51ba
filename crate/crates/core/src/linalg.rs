//! Dense linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector, Schur};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{EsnError, Result};
use crate::scalar::Scalar;

/// Above this size the spectral radius is estimated by power iteration
/// instead of a full Schur decomposition.
pub const DENSE_EIGEN_LIMIT: usize = 2000;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

fn check_square_finite<T: Scalar>(m: &DMatrix<T>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(EsnError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite_val()) {
        return Err(EsnError::NonFinite("matrix"));
    }
    Ok(())
}

/// Largest eigenvalue modulus of a square matrix.
///
/// Uses the dense Schur eigenvalues up to [`DENSE_EIGEN_LIMIT`] rows and
/// [`spectral_radius_power`] above that.
pub fn spectral_radius<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    check_square_finite(m)?;
    if m.nrows() == 0 {
        return Ok(T::zero());
    }
    if m.nrows() <= DENSE_EIGEN_LIMIT {
        match spectral_radius_dense(m) {
            Some(r) => Ok(r),
            None => spectral_radius_power(m, POWER_TOL, POWER_MAX_ITERS),
        }
    } else {
        spectral_radius_power(m, POWER_TOL, POWER_MAX_ITERS)
    }
}

/// `None` when the Schur iteration does not converge (it can stall on
/// exactly nilpotent input such as a zero matrix).
pub(crate) fn spectral_radius_dense<T: Scalar>(m: &DMatrix<T>) -> Option<T> {
    if m.iter().all(|v| *v == T::zero()) {
        return Some(T::zero());
    }
    let max_iters = 100 * m.nrows().max(10);
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), max_iters)?;
    Some(
        schur
            .complex_eigenvalues()
            .iter()
            .map(|c| c.re.hypot(c.im))
            .fold(T::zero(), |a, b| a.max(b)),
    )
}

/// Power iteration with a two-step Rayleigh fit.
///
/// Each iteration fits `A²v ≈ a·Av + b·v` in the least-squares sense; the
/// roots of `λ² − aλ − b` recover a dominant complex-conjugate (or `±λ`)
/// pair that plain power iteration cannot converge to. When `Av` is parallel
/// to `v` the one-step Rayleigh quotient is used instead.
pub fn spectral_radius_power<T: Scalar>(m: &DMatrix<T>, tol: f64, max_iters: usize) -> Result<T> {
    check_square_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(T::zero());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::<f64>::from_fn(n, |_, _| f64::sample_standard_normal(&mut rng));
    v /= v.norm();
    let a = m.map(|x| x.as_f64());
    let mut w = DVector::<f64>::zeros(n);
    let mut y = DVector::<f64>::zeros(n);
    let mut prev = f64::NAN;
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        w.gemv(1.0, &a, &v, 0.0);
        y.gemv(1.0, &a, &w, 0.0);
        estimate = two_step_estimate(&v, &w, &y);
        let ny = y.norm();
        if ny == 0.0 {
            // nilpotent within two steps
            return Ok(T::of(estimate));
        }
        v.copy_from(&y);
        v /= ny;
        if (estimate - prev).abs() <= tol * estimate.max(f64::MIN_POSITIVE) {
            return Ok(T::of(estimate));
        }
        prev = estimate;
    }
    log::warn!("power iteration hit {max_iters} iterations without converging");
    Ok(T::of(estimate))
}

fn two_step_estimate(v: &DVector<f64>, w: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let vv = v.dot(v);
    let ww = w.dot(w);
    let vw = v.dot(w);
    let det = ww * vv - vw * vw;
    let one_step = vw / vv;
    let one_step_resid = (w - v * one_step).norm();
    if det <= 1e-14 * ww * vv || one_step_resid <= 1e-13 * w.norm() {
        return one_step.abs();
    }
    let wy = w.dot(y);
    let vy = v.dot(y);
    let a = (vv * wy - vw * vy) / det;
    let b = (ww * vy - vw * wy) / det;
    let disc = a * a + 4.0 * b;
    if disc >= 0.0 {
        let s = disc.sqrt();
        ((a + s) / 2.0).abs().max(((a - s) / 2.0).abs())
    } else {
        (-b).sqrt()
    }
}

/// Largest singular value.
pub fn norm2<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |a, &b| a.max(b))
}

/// Max-abs deviation of `QᵀQ` from the identity.
pub fn orthonormality_deviation<T: Scalar>(q: &DMatrix<T>) -> T {
    let g = q.tr_mul(q);
    let mut dev = T::zero();
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { T::one() } else { T::zero() };
            dev = dev.max((g[(i, j)] - target).abs());
        }
    }
    dev
}

/// Index of the largest absolute entry; ties go to the lowest index.
pub fn argmax_abs<T: Scalar>(v: impl IntoIterator<Item = T>) -> Option<(usize, T)> {
    let mut best: Option<(usize, T)> = None;
    for (i, x) in v.into_iter().enumerate() {
        let a = x.abs();
        match best {
            Some((_, b)) if a <= b => {}
            _ => best = Some((i, a)),
        }
    }
    best
}
