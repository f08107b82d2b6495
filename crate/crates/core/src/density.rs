//! Density operators: PSD, unit-trace, Hermitian.

use crate::error::{Error, Result};
use crate::op::{CMatrix, Op};
use crate::spectral::{herm_eigen, herm_trace_norm, HERM_TOL, NEG_EIG_CLAMP};
use crate::system::SystemSpec;
use num_complex::Complex64;

const TRACE_TOL: f64 = 1e-10;

/// A quantum state. Construction validates Hermiticity (within `1e-10`),
/// positivity (eigenvalues at least `-1e-10`, then clamped to zero) and unit
/// trace (within `1e-10`); the stored matrix is the clamped PSD projection.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    op: Op,
}

impl DensityOp {
    pub fn new(op: Op) -> Result<Self> {
        let asym = op.herm_asymmetry();
        if asym > HERM_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::TraceNotOne(tr.re));
        }
        let (vals, vecs) = herm_eigen(op.matrix());
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < NEG_EIG_CLAMP {
            return Err(Error::NotPsd(min));
        }
        let matrix = if min < 0.0 {
            let n = vals.len();
            let mut d = CMatrix::zeros(n, n);
            for (i, &v) in vals.iter().enumerate() {
                d[(i, i)] = Complex64::new(v.max(0.0), 0.0);
            }
            let m = &vecs * d * vecs.adjoint();
            (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
        } else {
            op.matrix().clone()
        };
        Ok(DensityOp {
            op: Op::new(op.spec().clone(), matrix)?,
        })
    }

    /// Wrap without re-validating. For internal paths where the invariants
    /// hold by construction (CPTP outputs, normalized spectral rebuilds).
    pub(crate) fn new_unchecked(op: Op) -> Self {
        DensityOp { op }
    }

    pub fn from_matrix(spec: SystemSpec, matrix: CMatrix) -> Result<Self> {
        Self::new(Op::new(spec, matrix)?)
    }

    /// A pure state `|psi><psi|` from an unnormalized amplitude vector.
    pub fn pure_state(spec: SystemSpec, amplitudes: &[Complex64]) -> Result<Self> {
        let d = spec.total_dim();
        if amplitudes.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "state vector has {} amplitudes, spec needs {}",
                amplitudes.len(),
                d
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let mut m = CMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                m[(r, c)] = amplitudes[r] * amplitudes[c].conj() / (norm * norm);
            }
        }
        Ok(DensityOp {
            op: Op::new(spec, m)?,
        })
    }

    /// Maximally mixed state on a spec.
    pub fn maximally_mixed(spec: SystemSpec) -> Self {
        let d = spec.total_dim();
        let op = Op::identity(spec).scale_re(1.0 / d as f64);
        DensityOp { op }
    }

    /// Maximally entangled state between two labeled copies of dimension `d`.
    pub fn max_entangled_pair(
        label_a: impl Into<String>,
        label_b: impl Into<String>,
        d: usize,
    ) -> Result<Self> {
        Ok(DensityOp {
            op: crate::op::max_entangled_pair(label_a, label_b, d)?,
        })
    }

    pub fn op(&self) -> &Op {
        &self.op
    }

    pub fn into_op(self) -> Op {
        self.op
    }

    pub fn spec(&self) -> &SystemSpec {
        self.op.spec()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Reduced state on the kept labels.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOp> {
        Ok(DensityOp {
            op: self.op.partial_trace(keep)?,
        })
    }

    pub fn tensor(&self, other: &DensityOp) -> Result<DensityOp> {
        Ok(DensityOp {
            op: self.op.tensor(&other.op)?,
        })
    }

    pub fn permuted<S: AsRef<str>>(&self, new_order: &[S]) -> Result<DensityOp> {
        Ok(DensityOp {
            op: self.op.permuted(new_order)?,
        })
    }

    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Result<DensityOp> {
        Ok(DensityOp {
            op: self.op.relabeled(f)?,
        })
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        (self.matrix() * self.matrix()).trace().re
    }

    /// Error unless the state is rank one within `tol` (second-largest
    /// eigenvalue below `tol`).
    pub fn require_pure(&self, tol: f64) -> Result<()> {
        let mut evs = crate::spectral::herm_eigenvalues(self.matrix());
        evs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let second = evs.get(1).copied().unwrap_or(0.0);
        if second.abs() > tol {
            return Err(Error::NotPure(second));
        }
        Ok(())
    }
}

/// Trace distance `(1/2) ||rho - sigma||_1`, computed from the eigenvalues of
/// the Hermitian difference. Always in `[0, 1]`.
pub fn trace_distance(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    if rho.spec() != sigma.spec() {
        return Err(Error::SpecMismatch {
            left: rho.spec().describe(),
            right: sigma.spec().describe(),
        });
    }
    let diff = rho.matrix() - sigma.matrix();
    Ok(0.5 * herm_trace_norm(&diff))
}
