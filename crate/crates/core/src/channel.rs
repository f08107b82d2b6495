//! Completely positive trace-preserving maps in Kraus form, their Choi
//! states, Stinespring dilations and complementary channels, plus the
//! completely depolarizing map, unitary operator bases and the pinching map.

use crate::density::DensityOp;
use crate::error::{Error, Result};
use crate::op::{CMatrix, Op};
use crate::system::SystemSpec;
use num_complex::Complex64;

const KRAUS_TOL: f64 = 1e-9;

/// A quantum channel, stored as a list of Kraus operators (each
/// `d_out x d_in`) together with its input and output specs. The Kraus form
/// is the source of truth; the Choi state is derived on demand.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<CMatrix>,
    in_spec: SystemSpec,
    out_spec: SystemSpec,
}

impl Channel {
    /// Validate shapes and the trace-preservation condition
    /// `sum_k K_k^dag K_k = I` (within `1e-9`).
    pub fn new(in_spec: SystemSpec, out_spec: SystemSpec, kraus: Vec<CMatrix>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::EmptyKraus);
        }
        let din = in_spec.total_dim();
        let dout = out_spec.total_dim();
        for k in &kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::ShapeMismatch {
                    rows: k.nrows(),
                    cols: k.ncols(),
                    expected: dout,
                });
            }
        }
        let mut sum = CMatrix::zeros(din, din);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let dev = (&sum - CMatrix::identity(din, din))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > KRAUS_TOL {
            return Err(Error::KrausIncomplete(dev));
        }
        Ok(Channel {
            kraus,
            in_spec,
            out_spec,
        })
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn in_spec(&self) -> &SystemSpec {
        &self.in_spec
    }

    pub fn out_spec(&self) -> &SystemSpec {
        &self.out_spec
    }

    pub fn dim_in(&self) -> usize {
        self.in_spec.total_dim()
    }

    pub fn dim_out(&self) -> usize {
        self.out_spec.total_dim()
    }

    /// The identity channel on a spec.
    pub fn identity(spec: SystemSpec) -> Self {
        let d = spec.total_dim();
        Channel {
            kraus: vec![CMatrix::identity(d, d)],
            in_spec: spec.clone(),
            out_spec: spec,
        }
    }

    /// The completely depolarizing channel `rho -> I/d` on a spec, with Kraus
    /// operators `|i><j| / sqrt(d)`.
    pub fn depolarizing(spec: SystemSpec) -> Self {
        let d = spec.total_dim();
        let s = 1.0 / (d as f64).sqrt();
        let mut kraus = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut k = CMatrix::zeros(d, d);
                k[(i, j)] = Complex64::new(s, 0.0);
                kraus.push(k);
            }
        }
        Channel {
            kraus,
            in_spec: spec.clone(),
            out_spec: spec,
        }
    }

    /// The partial-trace channel keeping the labels in `keep` (in their
    /// original order). `keep` empty gives the full trace to the trivial
    /// system.
    pub fn trace_out<S: AsRef<str>>(in_spec: SystemSpec, keep: &[S]) -> Result<Self> {
        let mut keep_pos = Vec::new();
        for l in keep {
            keep_pos.push(in_spec.index_of(l.as_ref())?);
        }
        keep_pos.sort_unstable();
        keep_pos.dedup();
        let traced_pos: Vec<usize> = (0..in_spec.len())
            .filter(|i| !keep_pos.contains(i))
            .collect();
        let out_spec = in_spec.select(&keep_pos);
        let strides = in_spec.strides();
        let kept_offsets = crate::op::enumerate_offsets(in_spec.dims(), &strides, &keep_pos);
        let traced_offsets = crate::op::enumerate_offsets(in_spec.dims(), &strides, &traced_pos);
        let dout = out_spec.total_dim();
        let din = in_spec.total_dim();
        let mut kraus = Vec::with_capacity(traced_offsets.len());
        for &to in &traced_offsets {
            let mut k = CMatrix::zeros(dout, din);
            for (r, &ko) in kept_offsets.iter().enumerate() {
                k[(r, ko + to)] = Complex64::new(1.0, 0.0);
            }
            kraus.push(k);
        }
        Channel::new(in_spec, out_spec, kraus)
    }

    /// Apply the channel to the leading factors of an operator:
    /// `(T ox id)(x)`. The channel input labels must be a prefix of `x`'s
    /// labels; the remaining factors ride along untouched.
    pub fn apply_op(&self, x: &Op) -> Result<Op> {
        let labels = x.spec().labels();
        let n_in = self.in_spec.len();
        if labels.len() < n_in
            || labels[..n_in] != *self.in_spec.labels()
            || x.spec().dims()[..n_in] != *self.in_spec.dims()
        {
            return Err(Error::SpecMismatch {
                left: self.in_spec.describe(),
                right: x.spec().describe(),
            });
        }
        let rest = x.spec().select(&(n_in..x.spec().len()).collect::<Vec<_>>());
        let out_spec = self.out_spec.tensor(&rest)?;
        let d_rest = rest.total_dim();
        let id_rest = CMatrix::identity(d_rest, d_rest);
        let mut acc = CMatrix::zeros(out_spec.total_dim(), out_spec.total_dim());
        for k in &self.kraus {
            let k_ext = k.kronecker(&id_rest);
            acc += &k_ext * x.matrix() * k_ext.adjoint();
        }
        Op::new(out_spec, acc)
    }

    /// Apply to a state; CPTP maps preserve the density invariants.
    pub fn apply(&self, rho: &DensityOp) -> Result<DensityOp> {
        Ok(DensityOp::new_unchecked(self.apply_op(rho.op())?))
    }

    /// The Choi state `omega_{A'C} = (id_{A'} ox T)(Phi_{A'A})`, where `A'`
    /// carries primed copies of the input labels. Its reduction to `A'` is
    /// maximally mixed exactly when the channel is trace preserving.
    pub fn choi_state(&self) -> Result<DensityOp> {
        let primed = self.primed_in_spec()?;
        let d = self.dim_in();
        let dout = self.dim_out();
        // |Phi> = (1/sqrt d) sum_i |i>_{A'} |i>_A
        let mut phi = CMatrix::zeros(d * d, 1);
        let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        for i in 0..d {
            phi[(i * d + i, 0)] = amp;
        }
        let id = CMatrix::identity(d, d);
        let mut acc = CMatrix::zeros(d * dout, d * dout);
        for k in &self.kraus {
            let ext = id.kronecker(k);
            let v = &ext * &phi;
            acc += &v * v.adjoint();
        }
        let spec = primed.tensor(&self.out_spec)?;
        Ok(DensityOp::new_unchecked(Op::new(spec, acc)?))
    }

    /// Input labels with a prime appended (re-primed until fresh against the
    /// output labels).
    pub fn primed_in_spec(&self) -> Result<SystemSpec> {
        let mut parts = Vec::new();
        for (l, &d) in self.in_spec.labels().iter().zip(self.in_spec.dims()) {
            let mut candidate = format!("{l}'");
            while self.out_spec.contains(&candidate) || self.in_spec.contains(&candidate) {
                candidate.push('\'');
            }
            parts.push((candidate, d));
        }
        SystemSpec::new(parts)
    }

    /// Stinespring dilation: an isometry `V: A -> C ox env` with
    /// `V^dag V = I` and `Tr_env[V rho V^dag] = T(rho)`. The environment
    /// dimension equals the number of Kraus operators.
    pub fn stinespring(&self, env_label: impl Into<String>) -> Result<Isometry> {
        let env_label = env_label.into();
        if self.out_spec.contains(&env_label) || self.in_spec.contains(&env_label) {
            return Err(Error::DuplicateLabel(env_label));
        }
        let nk = self.kraus.len();
        let din = self.dim_in();
        let dout = self.dim_out();
        let env_spec = SystemSpec::single(env_label, nk)?;
        let out_spec = self.out_spec.tensor(&env_spec)?;
        // basis order (out, env): row o*nk + k
        let mut v = CMatrix::zeros(dout * nk, din);
        for (k_idx, k) in self.kraus.iter().enumerate() {
            for o in 0..dout {
                for i in 0..din {
                    v[(o * nk + k_idx, i)] = k[(o, i)];
                }
            }
        }
        Ok(Isometry {
            matrix: v,
            in_spec: self.in_spec.clone(),
            out_spec,
            env_spec,
        })
    }

    /// The complementary channel `rho -> Tr_C[V rho V^dag]`, mapping the
    /// input to the Stinespring environment.
    pub fn complementary(&self, env_label: impl Into<String>) -> Result<Channel> {
        let env_label = env_label.into();
        if self.in_spec.contains(&env_label) {
            return Err(Error::DuplicateLabel(env_label));
        }
        let nk = self.kraus.len();
        let din = self.dim_in();
        let dout = self.dim_out();
        let env_spec = SystemSpec::single(env_label, nk)?;
        // one Kraus operator per output basis index j: B_j[k, i] = K_k[j, i]
        let mut kraus = Vec::with_capacity(dout);
        for j in 0..dout {
            let mut b = CMatrix::zeros(nk, din);
            for (k_idx, k) in self.kraus.iter().enumerate() {
                for i in 0..din {
                    b[(k_idx, i)] = k[(j, i)];
                }
            }
            kraus.push(b);
        }
        Channel::new(self.in_spec.clone(), env_spec, kraus)
    }
}

/// An isometry with labeled input and output, produced by `stinespring`.
#[derive(Debug, Clone)]
pub struct Isometry {
    pub matrix: CMatrix,
    pub in_spec: SystemSpec,
    pub out_spec: SystemSpec,
    pub env_spec: SystemSpec,
}

impl Isometry {
    /// Largest entrywise deviation of `V^dag V` from the identity.
    pub fn defect(&self) -> f64 {
        let din = self.in_spec.total_dim();
        (self.matrix.adjoint() * &self.matrix - CMatrix::identity(din, din))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Conjugate a state by the isometry acting on a contiguous run of
    /// factors starting at `label`; the other factors ride along.
    pub fn apply_at(&self, rho: &DensityOp, label: &str) -> Result<DensityOp> {
        let spec = rho.spec();
        let start = spec.index_of(label)?;
        let span = self.in_spec.len();
        if start + span > spec.len()
            || spec.labels()[start..start + span] != *self.in_spec.labels()
            || spec.dims()[start..start + span] != *self.in_spec.dims()
        {
            return Err(Error::SpecMismatch {
                left: self.in_spec.describe(),
                right: spec.describe(),
            });
        }
        let pre = spec.select(&(0..start).collect::<Vec<_>>());
        let post = spec.select(&((start + span)..spec.len()).collect::<Vec<_>>());
        let out_spec = pre.tensor(&self.out_spec)?.tensor(&post)?;
        let id_pre = CMatrix::identity(pre.total_dim(), pre.total_dim());
        let id_post = CMatrix::identity(post.total_dim(), post.total_dim());
        let w = id_pre.kronecker(&self.matrix).kronecker(&id_post);
        let m = &w * rho.matrix() * w.adjoint();
        Ok(DensityOp::new_unchecked(Op::new(out_spec, m)?))
    }
}

/// The completely depolarizing map on one subsystem:
/// `E_A(X) = (I_A/|A|) ox Tr_A[X]`, reassembled in the original label order.
pub fn depolarize_ea(x: &Op, target: &str) -> Result<Op> {
    let pos = x.spec().index_of(target)?;
    let d = x.spec().dims()[pos];
    let keep: Vec<&String> = x
        .spec()
        .labels()
        .iter()
        .filter(|l| l.as_str() != target)
        .collect();
    let reduced = x.partial_trace(&keep)?;
    let id = Op::identity(SystemSpec::single(target, d)?).scale_re(1.0 / d as f64);
    let product = id.tensor(&reduced)?;
    product.permuted(x.spec().labels())
}

/// Apply a channel through its Choi state via
/// `T(rho) = d^2 <Phi| omega ox rho |Phi>`, contracting the `aprime` factors
/// of `omega` against the `a` factors of `rho`.
pub fn apply_via_choi<S: AsRef<str>, T: AsRef<str>>(
    omega: &DensityOp,
    aprime: &[S],
    rho: &DensityOp,
    a: &[T],
) -> Result<DensityOp> {
    let omega_perm = reorder_with_block_first(omega.op(), aprime)?;
    let rho_perm = reorder_with_block_first(rho.op(), a)?;
    let mut da = 1usize;
    for l in aprime {
        da *= omega.spec().dim_of(l.as_ref())?;
    }
    let mut da2 = 1usize;
    for l in a {
        da2 *= rho.spec().dim_of(l.as_ref())?;
    }
    if da != da2 {
        return Err(Error::DimensionMismatch(format!(
            "Choi reference block has dimension {da}, state block has {da2}"
        )));
    }
    let omega_m = coalesce_prefix(&omega_perm, aprime.len(), "_Ap")?;
    let rho_m = coalesce_prefix(&rho_perm, a.len(), "_A")?;
    let joint = omega_m.tensor(&rho_m)?;
    // (Ap, C.., A, E..) -> (Ap, A, C.., E..)
    let mut order: Vec<String> = vec!["_Ap".into(), "_A".into()];
    order.extend(
        joint
            .spec()
            .labels()
            .iter()
            .filter(|l| *l != "_Ap" && *l != "_A")
            .cloned(),
    );
    let contracted = joint.permuted(&order)?.phi_contract()?;
    DensityOp::new(contracted)
}

/// Permute so the given labels come first (in the given order), the rest
/// keeping their relative order.
pub(crate) fn reorder_with_block_first<S: AsRef<str>>(x: &Op, block: &[S]) -> Result<Op> {
    let mut order: Vec<String> = block.iter().map(|s| s.as_ref().to_string()).collect();
    for l in x.spec().labels() {
        if !order.contains(l) {
            order.push(l.clone());
        }
    }
    x.permuted(&order)
}

/// Merge the first `count` factors into a single labeled factor. The matrix
/// is untouched; only the spec changes.
pub(crate) fn coalesce_prefix(x: &Op, count: usize, new_label: &str) -> Result<Op> {
    let spec = x.spec();
    if count > spec.len() {
        return Err(Error::DimensionMismatch(format!(
            "cannot merge {count} factors of a {}-factor operator",
            spec.len()
        )));
    }
    let merged_dim: usize = spec.dims()[..count].iter().product();
    let mut parts = vec![(new_label.to_string(), merged_dim)];
    for i in count..spec.len() {
        parts.push((spec.labels()[i].clone(), spec.dims()[i]));
    }
    Op::new(SystemSpec::new(parts)?, x.matrix().clone())
}

/// An orthonormal basis of unitary operators: `d^2` unitaries with
/// `Tr[V_i^dag V_j] = d delta_ij`.
#[derive(Debug, Clone)]
pub struct UnitaryBasis {
    elements: Vec<CMatrix>,
    dim: usize,
}

impl UnitaryBasis {
    pub fn new(dim: usize, elements: Vec<CMatrix>) -> Result<Self> {
        if elements.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "need {} basis elements for dimension {}, got {}",
                dim * dim,
                dim,
                elements.len()
            )));
        }
        let id = CMatrix::identity(dim, dim);
        for v in &elements {
            let dev = (v.adjoint() * v - &id)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if dev > 1e-10 {
                return Err(Error::NotUnitary(dev));
            }
        }
        for (i, vi) in elements.iter().enumerate() {
            for (j, vj) in elements.iter().enumerate() {
                let ip = (vi.adjoint() * vj).trace();
                let want = if i == j { dim as f64 } else { 0.0 };
                if (ip - Complex64::new(want, 0.0)).norm() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "unitary basis is not trace-orthogonal at pair ({i},{j})"
                    )));
                }
            }
        }
        Ok(UnitaryBasis { elements, dim })
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Generalized Pauli (Weyl) basis `X^a Z^b`, `a, b in {0..d-1}`, with
/// `X|j> = |j+1 mod d>` and `Z|j> = e^{2 pi i j/d} |j>`.
pub fn weyl_basis(d: usize) -> Result<UnitaryBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(
            "Weyl basis needs dimension >= 2".into(),
        ));
    }
    let mut shift = CMatrix::zeros(d, d);
    for j in 0..d {
        shift[((j + 1) % d, j)] = Complex64::new(1.0, 0.0);
    }
    let mut clock = CMatrix::zeros(d, d);
    for j in 0..d {
        let angle = 2.0 * std::f64::consts::PI * j as f64 / d as f64;
        clock[(j, j)] = Complex64::new(angle.cos(), angle.sin());
    }
    let mut elements = Vec::with_capacity(d * d);
    let mut xa = CMatrix::identity(d, d);
    for _a in 0..d {
        let mut v = xa.clone();
        for _b in 0..d {
            elements.push(v.clone());
            v *= &clock;
        }
        xa = &shift * xa;
    }
    UnitaryBasis::new(d, elements)
}

/// Pinching onto the maximally entangled basis of the first two factors:
/// `sum_i Phi_i tau Phi_i` with `Phi_i = (I ox V_i) Phi (I ox V_i)^dag`.
/// CPTP on the pair, identity on the rest.
pub fn pinching(tau: &Op, basis: &UnitaryBasis) -> Result<Op> {
    let dims = tau.spec().dims();
    if dims.len() < 2 || dims[0] != basis.dim() || dims[1] != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pinching needs leading factor pair of dimension {}, operator has [{}]",
            basis.dim(),
            tau.spec().describe()
        )));
    }
    let d = basis.dim();
    let rest: usize = dims[2..].iter().product();
    let id = CMatrix::identity(d, d);
    let id_rest = CMatrix::identity(rest, rest);
    let phi = crate::op::max_entangled_pair("_P0", "_P1", d)?;
    let mut acc = CMatrix::zeros(tau.dim(), tau.dim());
    for v in basis.elements() {
        let rot = id.kronecker(v);
        let proj = &rot * phi.matrix() * rot.adjoint();
        let full = proj.kronecker(&id_rest);
        acc += &full * tau.matrix() * full.adjoint();
    }
    Op::new(tau.spec().clone(), acc)
}
