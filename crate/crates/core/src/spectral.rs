//! Hermitian functional calculus and Schatten norms.

use crate::error::{Error, Result};
use crate::op::{CMatrix, Op};
use num_complex::Complex64;

/// Hermiticity tolerance for functional-calculus inputs.
pub const HERM_TOL: f64 = 1e-10;
/// Eigenvalues above this (negative) threshold are treated as round-off and
/// clamped to zero; anything below `NEG_EIG_HARD` is a genuine error.
pub const NEG_EIG_CLAMP: f64 = -1e-10;
pub const NEG_EIG_HARD: f64 = -1e-8;

/// Eigendecomposition of a Hermitian matrix: real eigenvalues plus the
/// unitary of eigenvectors (columns).
pub fn herm_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    // symmetrize first so round-off in the input cannot leak into complex
    // eigenvalue parts
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Eigenvalues only.
pub fn herm_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// Apply `f` to the eigenvalues of a Hermitian matrix.
pub fn herm_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = herm_eigen(m);
    let n = vals.len();
    let mut d = CMatrix::zeros(n, n);
    for (i, &v) in vals.iter().enumerate() {
        d[(i, i)] = Complex64::new(f(v), 0.0);
    }
    &vecs * d * vecs.adjoint()
}

/// Real power of a Hermitian PSD operator.
///
/// Eigenvalues in `[NEG_EIG_HARD, 0)` are clamped to zero before the power is
/// taken; below that the input is rejected as indefinite. Negative powers use
/// the Moore–Penrose convention: zero eigenvalues stay zero.
pub fn herm_power(x: &Op, p: f64) -> Result<Op> {
    let asym = x.herm_asymmetry();
    if asym > HERM_TOL {
        return Err(Error::NotHermitian(asym));
    }
    let (vals, vecs) = herm_eigen(x.matrix());
    if let Some(&min) = vals
        .iter()
        .min_by(|a, b| a.partial_cmp(b).expect("NaN eigenvalue"))
    {
        if min < NEG_EIG_HARD {
            return Err(Error::NotPsd(min));
        }
    }
    // zero cutoff for the support, relative to the largest eigenvalue
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = max * 1e-13;
    let n = vals.len();
    let mut d = CMatrix::zeros(n, n);
    for (i, &v) in vals.iter().enumerate() {
        let v = v.max(0.0);
        let powered = if v <= cutoff { 0.0 } else { v.powf(p) };
        d[(i, i)] = Complex64::new(powered, 0.0);
    }
    let m = &vecs * d * vecs.adjoint();
    // rebuild is Hermitian up to round-off; symmetrize exactly
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    Op::new(x.spec().clone(), m)
}

/// Projector onto the support (range) of a Hermitian PSD operator.
pub fn support_projector(x: &Op) -> Result<Op> {
    herm_power(x, 0.0)
}

/// Schatten p-norm `(sum_i s_i^p)^(1/p)` over singular values; `p = inf` is
/// the operator norm. Requires `p >= 1`.
pub fn schatten_norm(x: &Op, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidSchattenOrder(p));
    }
    if p == 2.0 {
        // Frobenius norm, no decomposition needed
        return Ok(x.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
    let sv = x.matrix().clone().svd(false, false).singular_values;
    if p.is_infinite() {
        return Ok(sv.iter().cloned().fold(0.0, f64::max));
    }
    Ok(sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Trace norm of a Hermitian operator via its eigenvalues.
pub fn herm_trace_norm(m: &CMatrix) -> f64 {
    herm_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Von Neumann entropy `-sum lambda ln lambda` (nats) of a PSD matrix with
/// the `0 ln 0 = 0` convention.
pub fn von_neumann_entropy(m: &CMatrix) -> f64 {
    herm_eigenvalues(m)
        .iter()
        .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 })
        .sum()
}
