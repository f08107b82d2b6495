//! Dense complex operators on labeled multipartite systems.
//!
//! The basis convention is fixed once: row-major, lexicographic over the
//! subsystem computational bases in `SystemSpec` label order. Tensor
//! products, partial traces and permutations all derive their index
//! arithmetic from that single rule.

use crate::error::{Error, Result};
use crate::system::SystemSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// A bounded operator: a square complex matrix tagged with a `SystemSpec`.
#[derive(Debug, Clone, PartialEq)]
pub struct Op {
    spec: SystemSpec,
    matrix: CMatrix,
}

impl Op {
    /// Wrap a matrix; its side must equal the spec's total dimension.
    pub fn new(spec: SystemSpec, matrix: CMatrix) -> Result<Self> {
        let d = spec.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::ShapeMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected: d,
            });
        }
        Ok(Op { spec, matrix })
    }

    pub fn identity(spec: SystemSpec) -> Self {
        let d = spec.total_dim();
        Op {
            spec,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn zeros(spec: SystemSpec) -> Self {
        let d = spec.total_dim();
        Op {
            spec,
            matrix: CMatrix::zeros(d, d),
        }
    }

    /// The scalar operator `1` on the trivial system.
    pub fn scalar_one() -> Self {
        Op::identity(SystemSpec::scalar())
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Op {
        Op {
            spec: self.spec.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Op {
        Op {
            spec: self.spec.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn scale_re(&self, c: f64) -> Op {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Largest entrywise deviation from Hermiticity, `max |M - M^dag|`.
    pub fn herm_asymmetry(&self) -> f64 {
        let adj = self.matrix.adjoint();
        let mut worst = 0.0f64;
        for (a, b) in self.matrix.iter().zip(adj.iter()) {
            worst = worst.max((a - b).norm());
        }
        worst
    }

    /// `(M + M^dag)/2`.
    pub fn hermitized(&self) -> Op {
        Op {
            spec: self.spec.clone(),
            matrix: (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0),
        }
    }

    /// Largest entrywise modulus of the difference to `other`.
    pub fn max_abs_diff(&self, other: &Op) -> f64 {
        assert_eq!(self.spec, other.spec, "spec mismatch in max_abs_diff");
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Kronecker product with concatenated specs. Label sets must be disjoint.
    pub fn tensor(&self, other: &Op) -> Result<Op> {
        let spec = self.spec.tensor(&other.spec)?;
        Ok(Op {
            spec,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Trace out every subsystem not listed in `keep`. The kept factors stay
    /// in their original relative order; the total trace is preserved.
    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Op> {
        let mut keep_pos = Vec::with_capacity(keep.len());
        for l in keep {
            keep_pos.push(self.spec.index_of(l.as_ref())?);
        }
        keep_pos.sort_unstable();
        keep_pos.dedup();
        let traced_pos: Vec<usize> = (0..self.spec.len())
            .filter(|i| !keep_pos.contains(i))
            .collect();

        let out_spec = self.spec.select(&keep_pos);
        let strides = self.spec.strides();
        let dims = self.spec.dims();

        let kept_offsets = enumerate_offsets(dims, &strides, &keep_pos);
        let traced_offsets = enumerate_offsets(dims, &strides, &traced_pos);

        let n_out = out_spec.total_dim();
        let mut out = CMatrix::zeros(n_out, n_out);
        for (r, &ro) in kept_offsets.iter().enumerate() {
            for (c, &co) in kept_offsets.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &to in &traced_offsets {
                    acc += self.matrix[(ro + to, co + to)];
                }
                out[(r, c)] = acc;
            }
        }
        Ok(Op {
            spec: out_spec,
            matrix: out,
        })
    }

    /// Reorder the tensor factors. `new_order` must be a permutation of the
    /// current labels.
    pub fn permuted<S: AsRef<str>>(&self, new_order: &[S]) -> Result<Op> {
        if new_order.len() != self.spec.len() {
            return Err(Error::DimensionMismatch(format!(
                "permutation lists {} labels, operator has {}",
                new_order.len(),
                self.spec.len()
            )));
        }
        let mut perm = Vec::with_capacity(new_order.len());
        for l in new_order {
            let p = self.spec.index_of(l.as_ref())?;
            if perm.contains(&p) {
                return Err(Error::DuplicateLabel(l.as_ref().to_string()));
            }
            perm.push(p);
        }
        let out_spec = self.spec.select(&perm);
        let old_strides = self.spec.strides();
        let n = self.dim();

        // map each new basis index to the old one
        let out_dims = out_spec.dims().to_vec();
        let mut index_map = vec![0usize; n];
        for (new_idx, slot) in index_map.iter_mut().enumerate() {
            let mut rem = new_idx;
            let mut old_idx = 0usize;
            for (k, &d) in out_dims.iter().enumerate().rev() {
                let ik = rem % d;
                rem /= d;
                old_idx += ik * old_strides[perm[k]];
            }
            *slot = old_idx;
        }

        let mut out = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] = self.matrix[(index_map[r], index_map[c])];
            }
        }
        Ok(Op {
            spec: out_spec,
            matrix: out,
        })
    }

    /// Rename subsystems (dimensions unchanged).
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Result<Op> {
        Ok(Op {
            spec: self.spec.relabeled(f)?,
            matrix: self.matrix.clone(),
        })
    }

    /// Conjugate by a unitary acting on a contiguous run of factors starting
    /// at `label`: returns `(I ⊗ U ⊗ I) X (I ⊗ U ⊗ I)^dag`. The run length is
    /// inferred from the side of `u`.
    pub fn conjugated_from(&self, label: &str, u: &CMatrix) -> Result<Op> {
        let w = self.embed_from(label, u)?;
        Ok(Op {
            spec: self.spec.clone(),
            matrix: &w * &self.matrix * w.adjoint(),
        })
    }

    /// Embed a square matrix acting on consecutive factors starting at
    /// `label` into the full space.
    pub fn embed_from(&self, label: &str, u: &CMatrix) -> Result<CMatrix> {
        if u.nrows() != u.ncols() {
            return Err(Error::ShapeMismatch {
                rows: u.nrows(),
                cols: u.ncols(),
                expected: u.nrows(),
            });
        }
        let start = self.spec.index_of(label)?;
        let dims = self.spec.dims();
        let mut mid = 1usize;
        let mut end = start;
        while mid < u.nrows() && end < dims.len() {
            mid *= dims[end];
            end += 1;
        }
        if mid != u.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "no contiguous factor run starting at `{label}` has dimension {}",
                u.nrows()
            )));
        }
        let pre: usize = dims[..start].iter().product();
        let post: usize = dims[end..].iter().product();
        let id_pre = CMatrix::identity(pre, pre);
        let id_post = CMatrix::identity(post, post);
        Ok(id_pre.kronecker(u).kronecker(&id_post))
    }

    /// Contract the first two factors (equal dimension `d`) against the
    /// maximally entangled vector: returns `d^2 <Phi| X |Phi>` on the
    /// remaining factors.
    pub fn phi_contract(&self) -> Result<Op> {
        if self.spec.len() < 2 {
            return Err(Error::DimensionMismatch(
                "phi_contract needs at least two factors".into(),
            ));
        }
        let dims = self.spec.dims();
        let d = dims[0];
        if dims[1] != d {
            return Err(Error::DimensionMismatch(format!(
                "first two factors must have equal dimension (got {} and {})",
                dims[0], dims[1]
            )));
        }
        let rest_pos: Vec<usize> = (2..self.spec.len()).collect();
        let out_spec = self.spec.select(&rest_pos);
        let rest = out_spec.total_dim();
        // factor 0 has stride d*rest, factor 1 has stride rest
        let pair_stride = (d + 1) * rest;
        let mut out = CMatrix::zeros(rest, rest);
        for r in 0..rest {
            for c in 0..rest {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    for j in 0..d {
                        acc += self.matrix[(i * pair_stride + r, j * pair_stride + c)];
                    }
                }
                // d^2 <Phi|..|Phi> carries 1/d from the two normalizations
                out[(r, c)] = acc * Complex64::new(d as f64, 0.0);
            }
        }
        Ok(Op {
            spec: out_spec,
            matrix: out,
        })
    }
}

/// Basis offsets of all multi-index combinations over the factor positions
/// in `positions`, lexicographic in that order.
pub(crate) fn enumerate_offsets(
    dims: &[usize],
    strides: &[usize],
    positions: &[usize],
) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(offsets.len() * dims[p]);
        for &o in &offsets {
            for i in 0..dims[p] {
                next.push(o + i * strides[p]);
            }
        }
        offsets = next;
    }
    offsets
}

impl std::ops::Add for &Op {
    type Output = Op;
    fn add(self, rhs: &Op) -> Op {
        assert_eq!(self.spec, rhs.spec, "spec mismatch in Op addition");
        Op {
            spec: self.spec.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl std::ops::Sub for &Op {
    type Output = Op;
    fn sub(self, rhs: &Op) -> Op {
        assert_eq!(self.spec, rhs.spec, "spec mismatch in Op subtraction");
        Op {
            spec: self.spec.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl std::ops::Mul for &Op {
    type Output = Op;
    fn mul(self, rhs: &Op) -> Op {
        assert_eq!(self.spec, rhs.spec, "spec mismatch in Op product");
        Op {
            spec: self.spec.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// Maximally entangled state `Phi` between two labeled copies of dimension
/// `d`: rank one, trace one. `d = 1` degenerates to the scalar 1.
pub fn max_entangled_pair(
    label_a: impl Into<String>,
    label_b: impl Into<String>,
    d: usize,
) -> Result<Op> {
    if d < 1 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let spec = SystemSpec::new([(label_a.into(), d), (label_b.into(), d)])?;
    let n = d * d;
    let mut vec = CMatrix::zeros(n, 1);
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    for i in 0..d {
        vec[(i * d + i, 0)] = amp;
    }
    let matrix = &vec * vec.adjoint();
    Op::new(spec, matrix)
}

/// `max_entangled_pair` with default labels `A`, `A'`.
pub fn max_entangled(d: usize) -> Result<Op> {
    max_entangled_pair("A", "A'", d)
}

/// Non-normalized maximally entangled operator `sum_ij |ii><jj|` (trace `d`).
pub fn max_entangled_unnormalized(
    label_a: impl Into<String>,
    label_b: impl Into<String>,
    d: usize,
) -> Result<Op> {
    let phi = max_entangled_pair(label_a, label_b, d)?;
    Ok(phi.scale_re(d as f64))
}

/// Swap operator between two labeled copies of dimension `d`:
/// Hermitian, `F^2 = I`, `Tr F = d`.
pub fn swap_pair(label_a: impl Into<String>, label_b: impl Into<String>, d: usize) -> Result<Op> {
    if d < 2 {
        return Err(Error::InvalidArgument(
            "swap operator needs dimension >= 2".into(),
        ));
    }
    let spec = SystemSpec::new([(label_a.into(), d), (label_b.into(), d)])?;
    let n = d * d;
    let mut matrix = CMatrix::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            matrix[(i * d + j, j * d + i)] = Complex64::new(1.0, 0.0);
        }
    }
    Op::new(spec, matrix)
}

/// `swap_pair` with default labels `A`, `At`.
pub fn swap_operator(d: usize) -> Result<Op> {
    swap_pair("A", "At", d)
}

/// Projector `|k><k|` on a single labeled system.
pub fn basis_projector(label: impl Into<String>, d: usize, k: usize) -> Result<Op> {
    let spec = SystemSpec::single(label, d)?;
    let mut m = CMatrix::zeros(d, d);
    m[(k, k)] = Complex64::new(1.0, 0.0);
    Op::new(spec, m)
}
