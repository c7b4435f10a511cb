//! Closed-form proximal operators of the nuclear norm and the entry-wise l1
//! norm.

use crate::error::Result;
use crate::matrix::{svd, DenseMatrix};

/// Singular value thresholding: `L · diag([σ − threshold]₊) · Rᵀ`.
///
/// This is the minimiser of `½‖U − m‖²_F + threshold · ‖U‖_*`.
pub fn svt(m: &DenseMatrix, threshold: f64) -> Result<DenseMatrix> {
    debug_assert!(threshold >= 0.0);
    let decomposition = svd(m)?;
    let shrunk: Vec<f64> = decomposition
        .singular
        .iter()
        .map(|&s| (s - threshold).max(0.0))
        .collect();
    Ok(decomposition.recompose(&shrunk))
}

/// `sign(a) · [|a| − b]₊`.
#[inline]
pub fn soft_threshold(a: f64, b: f64) -> f64 {
    debug_assert!(b >= 0.0);
    let magnitude = a.abs() - b;
    if magnitude > 0.0 {
        magnitude.copysign(a)
    } else {
        0.0
    }
}

/// Entry-wise soft thresholding, the proximal operator of `threshold · ‖·‖₁`.
pub fn prox_l1(m: &DenseMatrix, threshold: f64) -> DenseMatrix {
    m.map(|v| soft_threshold(v, threshold))
}
