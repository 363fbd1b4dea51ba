//! Local stability of full, POD and DEIM networks via Jacobian spectra.
//!
//! With `g = W_rr x + W_ir u + W_br` and `f′ = 1 − tanh²`:
//!
//! ```text
//! J_full(x)  = (1 − γ)I + γ·diag(f′(g(x)))·W_rr
//! J_pod(z)   = (1 − γ)I + γ·Tᵀ·diag(f′(g(Tz)))·W_rr T
//! J_deim(z)  = (1 − γ)I + γ·(Tᵀ T₂)·diag(f′(Pᵀg(Tz)))·PᵀW_rr T
//! ```
//!
//! The DEIM Jacobian carries the `(PᵀU)⁻¹` factor inside `T₂`, which can
//! amplify it past one even when the POD Jacobian is contractive.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deim::DeimEsn;
use crate::error::{EsnError, Result};
use crate::esn::EchoStateNetwork;
use crate::linalg::spectral_radius;
use crate::pod::PodEsn;
use crate::reservoir::{check_dim, Reservoir};
use crate::scalar::Scalar;

/// Spectral radii of the Jacobians at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub point_id: usize,
    pub input: Vec<f64>,
    pub rho_full: f64,
    pub rho_pod: Option<f64>,
    pub rho_deim: Option<f64>,
    pub stable_full: bool,
    pub stable_pod: Option<bool>,
    pub stable_deim: Option<bool>,
}

fn tanh_slope<T: Scalar>(g: &DVector<T>) -> DVector<T> {
    g.map(|v| {
        let t = v.tanh();
        T::one() - t * t
    })
}

/// `(1 − γ)I + γ·left·diag(d)·right`.
fn assemble<T: Scalar>(gamma: T, left: Option<&DMatrix<T>>, d: &DVector<T>, right: &DMatrix<T>) -> DMatrix<T> {
    let mut scaled = right.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= d[i];
    }
    let mut j = match left {
        Some(l) => l * scaled,
        None => scaled,
    };
    j *= gamma;
    let keep = T::one() - gamma;
    for i in 0..j.nrows() {
        j[(i, i)] += keep;
    }
    j
}

pub fn jacobian_full<T: Scalar>(esn: &EchoStateNetwork<T>, x: &DVector<T>, u: &DVector<T>) -> Result<DMatrix<T>> {
    let d = tanh_slope(&esn.preactivation(x, u)?);
    Ok(assemble(esn.leak_rate(), None, &d, esn.w_rr()))
}

pub fn jacobian_pod<T: Scalar>(pe: &PodEsn<T>, z: &DVector<T>, u: &DVector<T>) -> Result<DMatrix<T>> {
    let d = tanh_slope(&pe.preactivation(z, u)?);
    Ok(assemble(pe.leak_rate(), Some(&pe.basis().transpose()), &d, pe.w_rr_t()))
}

pub fn jacobian_deim<T: Scalar>(de: &DeimEsn<T>, z: &DVector<T>, u: &DVector<T>) -> Result<DMatrix<T>> {
    let d = tanh_slope(&de.preactivation(z, u)?);
    Ok(assemble(de.leak_rate(), Some(de.lift()), &d, de.w_rr_t_piv()))
}

/// Evaluates all available Jacobians at the full-space point `x` (reduced
/// models use `z = Tᵀx`).
pub fn stability_spectrum<T: Scalar>(
    esn: &EchoStateNetwork<T>,
    pe: Option<&PodEsn<T>>,
    de: Option<&DeimEsn<T>>,
    x: &DVector<T>,
    u: &DVector<T>,
    point_id: usize,
) -> Result<StabilityReport> {
    check_dim("state point", esn.state_dim(), x.len())?;
    check_dim("input point", esn.input_dim(), u.len())?;
    if x.iter().chain(u.iter()).any(|v| !v.is_finite_val()) {
        return Err(EsnError::NonFinite("stability point"));
    }
    let rho_full = spectral_radius(&jacobian_full(esn, x, u)?)?.as_f64();
    let rho_pod = pe
        .map(|p| -> Result<f64> {
            let z = p.project(x)?;
            Ok(spectral_radius(&jacobian_pod(p, &z, u)?)?.as_f64())
        })
        .transpose()?;
    let rho_deim = de
        .map(|d| -> Result<f64> {
            let z = d.base().project(x)?;
            Ok(spectral_radius(&jacobian_deim(d, &z, u)?)?.as_f64())
        })
        .transpose()?;
    Ok(StabilityReport {
        point_id,
        input: u.iter().map(|v| v.as_f64()).collect(),
        rho_full,
        rho_pod,
        rho_deim,
        stable_full: rho_full < 1.0,
        stable_pod: rho_pod.map(|r| r < 1.0),
        stable_deim: rho_deim.map(|r| r < 1.0),
    })
}

/// [`stability_spectrum`] over many `(x, u)` points concurrently; reports are
/// returned in point order.
pub fn stability_sweep<T: Scalar>(
    esn: &EchoStateNetwork<T>,
    pe: Option<&PodEsn<T>>,
    de: Option<&DeimEsn<T>>,
    points: &[(DVector<T>, DVector<T>)],
) -> Result<Vec<StabilityReport>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, (x, u))| stability_spectrum(esn, pe, de, x, u, i))
        .collect()
}
