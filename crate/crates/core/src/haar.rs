//! Haar-random unitaries, reproducible Monte Carlo averaging over the
//! unitary group, and the exact first/second-moment twirling formulas.
//!
//! Monte Carlo draws are keyed by `(seed, stream, sample-index)` through a
//! counter-based derivation, so serial and parallel runs with the same
//! stream partition produce bit-identical results.

use crate::channel::depolarize_ea;
use crate::density::DensityOp;
use crate::error::{Error, Result};
use crate::op::{CMatrix, Op};
use crate::system::SystemSpec;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
}

fn mix(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based RNG for one Monte Carlo draw, keyed by
/// `(seed, stream, index)`.
pub fn sample_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut state = mix(seed);
    state ^= mix(stream.wrapping_add(0xA076_1D64_78BD_642F));
    state = mix(state);
    state ^= mix(index.wrapping_add(0xE703_7ED1_A0B4_28DB));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        splitmix64(&mut state);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    rand::SeedableRng::from_seed(key)
}

/// Draw a Haar-distributed unitary: complex Ginibre matrix, QR
/// decomposition, then a column phase fix from the diagonal of `R` so the
/// result is the unique Q-factor with positive-diagonal `R`.
pub fn sample_haar_with(d: usize, rng: &mut impl Rng) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal) * scale,
            rng.sample::<f64, _>(StandardNormal) * scale,
        )
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// One keyed Haar draw.
pub fn sample_haar(d: usize, seed: u64, stream: u64, index: u64) -> CMatrix {
    sample_haar_with(d, &mut sample_rng(seed, stream, index))
}

/// Largest entrywise deviation of `U^dag U` from the identity.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.ncols();
    (u.adjoint() * u - CMatrix::identity(d, d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// A Monte Carlo scalar estimate with its sampling provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub n_streams: u64,
}

/// Per-stream sample counts for an even partition of `n` over `streams`.
fn partition(n: u64, streams: u64) -> Vec<u64> {
    let base = n / streams;
    let extra = n % streams;
    (0..streams).map(|s| base + u64::from(s < extra)).collect()
}

/// Estimate `E_U f(U)` over the Haar measure with `n` samples split across
/// `streams` independent substreams. Deterministic in `(seed, streams, n)`;
/// streams are evaluated in parallel but combined in stream order.
pub fn mc_expectation<F>(f: F, d: usize, n: u64, seed: u64, streams: u64) -> Result<McEstimate>
where
    F: Fn(&CMatrix) -> f64 + Sync,
{
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if streams == 0 {
        return Err(Error::InvalidArgument("need at least one stream".into()));
    }
    let counts = partition(n, streams);
    let bases: Vec<u64> = counts
        .iter()
        .scan(0u64, |acc, &c| {
            let b = *acc;
            *acc += c;
            Some(b)
        })
        .collect();

    // Welford accumulation per stream, then Chan's pairwise merge in stream
    // order. The naive sum-of-squares formula loses all precision when the
    // estimand is (nearly) constant; this keeps stderr honest at 1e-16 scale.
    let partials: Vec<std::result::Result<(u64, f64, f64), u64>> = (0..streams as usize)
        .into_par_iter()
        .map(|s| {
            let mut count = 0u64;
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for idx in 0..counts[s] {
                let u = sample_haar(d, seed, s as u64, idx);
                let v = f(&u);
                if !v.is_finite() {
                    return Err(bases[s] + idx);
                }
                count += 1;
                let delta = v - mean;
                mean += delta / count as f64;
                m2 += delta * (v - mean);
            }
            Ok((count, mean, m2))
        })
        .collect();

    let mut count = 0u64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for p in partials {
        match p {
            Ok((nb, mb, m2b)) => {
                if nb == 0 {
                    continue;
                }
                let na = count;
                count += nb;
                let delta = mb - mean;
                mean += delta * nb as f64 / count as f64;
                m2 += m2b + delta * delta * (na as f64 * nb as f64 / count as f64);
            }
            Err(index) => return Err(Error::NonFiniteSample { index }),
        }
    }
    let nf = n as f64;
    let var = (m2 / (nf - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        n_samples: n,
        seed,
        n_streams: streams,
    })
}

/// Entrywise Monte Carlo estimate of an operator-valued Haar average.
#[derive(Debug, Clone)]
pub struct McOperatorEstimate {
    pub mean: Op,
    /// Standard errors of the real parts, entrywise.
    pub stderr_re: DMatrix<f64>,
    /// Standard errors of the imaginary parts, entrywise.
    pub stderr_im: DMatrix<f64>,
    pub n_samples: u64,
    pub seed: u64,
    pub n_streams: u64,
}

impl McOperatorEstimate {
    /// Largest entrywise modulus of `mean - reference`.
    pub fn max_abs_deviation(&self, reference: &Op) -> f64 {
        self.mean.max_abs_diff(reference)
    }

    /// True when every entry of `reference` lies within `k` standard errors
    /// of the estimated mean (real and imaginary parts separately).
    pub fn covers_within(&self, reference: &Op, k: f64) -> bool {
        let n = self.mean.dim();
        for r in 0..n {
            for c in 0..n {
                let diff = self.mean.matrix()[(r, c)] - reference.matrix()[(r, c)];
                // allow an absolute floor for entries whose estimator collapses
                let tol_re = k * self.stderr_re[(r, c)] + 1e-12;
                let tol_im = k * self.stderr_im[(r, c)] + 1e-12;
                if diff.re.abs() > tol_re || diff.im.abs() > tol_im {
                    return false;
                }
            }
        }
        true
    }
}

/// Operator-valued version of `mc_expectation`; `f` must return operators on
/// a fixed spec.
pub fn mc_operator_expectation<F>(
    f: F,
    d: usize,
    n: u64,
    seed: u64,
    streams: u64,
) -> Result<McOperatorEstimate>
where
    F: Fn(&CMatrix) -> Op + Sync,
{
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    if streams == 0 {
        return Err(Error::InvalidArgument("need at least one stream".into()));
    }
    let counts = partition(n, streams);

    struct Acc {
        sum: CMatrix,
        sumsq_re: DMatrix<f64>,
        sumsq_im: DMatrix<f64>,
        spec: Option<SystemSpec>,
    }

    let partials: Vec<Option<Acc>> = (0..streams as usize)
        .into_par_iter()
        .map(|s| {
            let mut acc: Option<Acc> = None;
            for idx in 0..counts[s] {
                let u = sample_haar(d, seed, s as u64, idx);
                let x = f(&u);
                let a = acc.get_or_insert_with(|| Acc {
                    sum: CMatrix::zeros(x.dim(), x.dim()),
                    sumsq_re: DMatrix::zeros(x.dim(), x.dim()),
                    sumsq_im: DMatrix::zeros(x.dim(), x.dim()),
                    spec: Some(x.spec().clone()),
                });
                a.sum += x.matrix();
                for r in 0..x.dim() {
                    for c in 0..x.dim() {
                        let z = x.matrix()[(r, c)];
                        a.sumsq_re[(r, c)] += z.re * z.re;
                        a.sumsq_im[(r, c)] += z.im * z.im;
                    }
                }
            }
            acc
        })
        .collect();

    // streams can outnumber samples; empty ones contribute nothing
    let spec = partials
        .iter()
        .flatten()
        .next()
        .and_then(|a| a.spec.clone())
        .expect("n >= 2 guarantees a non-empty stream");
    let dim = spec.total_dim();
    let mut sum = CMatrix::zeros(dim, dim);
    let mut sumsq_re = DMatrix::zeros(dim, dim);
    let mut sumsq_im = DMatrix::zeros(dim, dim);
    for p in partials.iter().flatten() {
        sum += &p.sum;
        sumsq_re += &p.sumsq_re;
        sumsq_im += &p.sumsq_im;
    }
    let nf = n as f64;
    let mean = &sum / Complex64::new(nf, 0.0);
    let mut stderr_re = DMatrix::zeros(dim, dim);
    let mut stderr_im = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            let m = mean[(r, c)];
            let var_re = ((sumsq_re[(r, c)] - nf * m.re * m.re) / (nf - 1.0)).max(0.0);
            let var_im = ((sumsq_im[(r, c)] - nf * m.im * m.im) / (nf - 1.0)).max(0.0);
            stderr_re[(r, c)] = (var_re / nf).sqrt();
            stderr_im[(r, c)] = (var_im / nf).sqrt();
        }
    }
    Ok(McOperatorEstimate {
        mean: Op::new(spec, mean)?,
        stderr_re,
        stderr_im,
        n_samples: n,
        seed,
        n_streams: streams,
    })
}

/// Spec of the two-copy twirl operator: `(A', A, At, At')`, each of
/// dimension `d`, matching the factor order of
/// `Phi~_{A'A} ox Phi~_{At At'}`.
pub fn twirl_spec(d: usize) -> SystemSpec {
    SystemSpec::new([("A'", d), ("A", d), ("At", d), ("At'", d)]).expect("fixed labels")
}

/// Exact Haar average `E_U [Phi~^{U+}_{A'A} ox Phi~^{U+}_{At At'}]` in the
/// non-normalized convention (`Tr Phi~ = d`):
///
/// `1/(d^2-1) * I  -  1/(d^3-d) * (F_A + F_A')  +  1/(d^2-1) * F_A F_A'`
///
/// where `F_A` swaps `A <-> At` and `F_A'` swaps `A' <-> At'`.
pub fn twirl_two_copy(d: usize) -> Result<Op> {
    if d < 2 {
        return Err(Error::InvalidArgument(
            "two-copy twirl needs dimension >= 2 (denominators d^2-1, d^3-d)".into(),
        ));
    }
    let spec = twirl_spec(d);
    let order: Vec<&str> = vec!["A'", "A", "At", "At'"];
    let ident = Op::identity(spec.clone());

    let f_a = crate::op::swap_pair("A", "At", d)?;
    let f_ap = crate::op::swap_pair("A'", "At'", d)?;
    let id_a = Op::identity(SystemSpec::new([("A", d), ("At", d)])?);
    let id_ap = Op::identity(SystemSpec::new([("A'", d), ("At'", d)])?);

    let t_a = f_a.tensor(&id_ap)?.permuted(&order)?;
    let t_ap = id_a.tensor(&f_ap)?.permuted(&order)?;
    let t_both = f_a.tensor(&f_ap)?.permuted(&order)?;

    let c1 = 1.0 / ((d * d - 1) as f64);
    let c2 = 1.0 / ((d * d * d - d) as f64);
    let mut m = ident.scale_re(c1);
    m = &m - &t_a.scale_re(c2);
    m = &m - &t_ap.scale_re(c2);
    m = &m + &t_both.scale_re(c1);
    Ok(m)
}

/// One sample of the two-copy estimand `Phi~^{U+}_{A'A} ox Phi~^{U+}_{At At'}`
/// (with `U^dag` acting on `A` resp. `At`), on the same spec as
/// `twirl_two_copy`.
pub fn twirl_two_copy_sample(d: usize, u: &CMatrix) -> Result<Op> {
    let phi1 = crate::op::max_entangled_unnormalized("A'", "A", d)?;
    let phi2 = crate::op::max_entangled_unnormalized("At", "At'", d)?;
    let udag = u.adjoint();
    let r1 = phi1.conjugated_from("A", &udag)?;
    let r2 = phi2.conjugated_from("At", &udag)?;
    r1.tensor(&r2)?.permuted(&["A'", "A", "At", "At'"])
}

/// The decoupling-map evaluation `Theta(Y)(U) = d^2 <Phi| U_A Y U_A^dag |Phi>`
/// for `Y` whose first two factors are `(A', A)` of equal dimension; returns
/// an operator on the remaining factors.
///
/// Contracted directly against `|psi> = (1 ox U^dag)|Phi>` rather than by
/// conjugating the full operator:
/// `out[r,c] = d sum U[a',a] conj(U[b',b]) Y[(a',a,r),(b',b,c)]`.
pub fn theta_map(y: &Op, u: &CMatrix) -> Result<Op> {
    let dims = y.spec().dims();
    if dims.len() < 2 {
        return Err(Error::DimensionMismatch(
            "theta map needs a leading (A', A) factor pair".into(),
        ));
    }
    let d = dims[0];
    if dims[1] != d || u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "theta map needs equal leading dimensions matching the unitary (got {} / {} / {})",
            dims[0],
            dims[1],
            u.nrows()
        )));
    }
    let rest_pos: Vec<usize> = (2..dims.len()).collect();
    let out_spec = y.spec().select(&rest_pos);
    let rest = out_spec.total_dim();
    let mut out = CMatrix::zeros(rest, rest);
    let ym = y.matrix();
    for ap in 0..d {
        for a in 0..d {
            let w1 = u[(ap, a)];
            let row_base = (ap * d + a) * rest;
            for bp in 0..d {
                for b in 0..d {
                    let w = w1 * u[(bp, b)].conj() * d as f64;
                    let col_base = (bp * d + b) * rest;
                    for r in 0..rest {
                        for c in 0..rest {
                            out[(r, c)] += w * ym[(row_base + r, col_base + c)];
                        }
                    }
                }
            }
        }
    }
    Op::new(out_spec, out)
}

/// Exact second moment `E_U || Theta(Y - E_A Y)(U) ||_2^2` for `Y` on
/// `(A', A, rest..)`:
///
/// `d^2/(d^2-1) ||Y°||_2^2 - d^2/(d^3-d) ||Y°_{A rest}||_2^2`
///
/// with `Y° = Y - E_A(Y)` and `Y°_{A rest} = Tr_{A'} Y°`. Non-negative.
pub fn exact_theta_second_moment(y: &Op) -> Result<f64> {
    let labels = y.spec().labels().to_vec();
    if labels.len() < 2 {
        return Err(Error::DimensionMismatch(
            "need a leading (A', A) factor pair".into(),
        ));
    }
    let d = y.spec().dims()[0];
    if y.spec().dims()[1] != d {
        return Err(Error::DimensionMismatch(format!(
            "leading factors must have equal dimension (got {} and {})",
            y.spec().dims()[0],
            y.spec().dims()[1]
        )));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(
            "second-moment identity needs d >= 2".into(),
        ));
    }
    let ring = &(y.clone()) - &depolarize_ea(y, &labels[1])?;
    let t1: f64 = ring.matrix().iter().map(|z| z.norm_sqr()).sum();
    let keep: Vec<&String> = labels.iter().skip(1).collect();
    let ring_ace = ring.partial_trace(&keep)?;
    let t2: f64 = ring_ace.matrix().iter().map(|z| z.norm_sqr()).sum();
    let d2 = (d * d) as f64;
    let value = d2 / (d2 - 1.0) * t1 - d2 / ((d * d * d - d) as f64) * t2;
    Ok(value.max(0.0))
}

/// Random full-rank density operator (normalized Ginibre Gram matrix).
pub fn random_density(spec: SystemSpec, rng: &mut impl Rng) -> DensityOp {
    let d = spec.total_dim();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(
            rng.sample::<f64, _>(StandardNormal) * scale,
            rng.sample::<f64, _>(StandardNormal) * scale,
        )
    });
    let gram = &g * g.adjoint();
    let tr = gram.trace().re;
    DensityOp::new_unchecked(Op::new(spec, gram / Complex64::new(tr, 0.0)).expect("square"))
}

/// Random pure state (normalized Ginibre vector).
pub fn random_pure(spec: SystemSpec, rng: &mut impl Rng) -> DensityOp {
    let d = spec.total_dim();
    let amps: Vec<Complex64> = (0..d)
        .map(|_| {
            Complex64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        })
        .collect();
    DensityOp::pure_state(spec, &amps).expect("nonzero Gaussian vector")
}

/// Random channel with `n_kraus` Kraus operators (Ginibre matrices
/// right-normalized to a CPTP set). Needs `n_kraus * dim_out >= dim_in`.
pub fn random_channel(
    in_spec: SystemSpec,
    out_spec: SystemSpec,
    n_kraus: usize,
    rng: &mut impl Rng,
) -> Result<crate::channel::Channel> {
    let din = in_spec.total_dim();
    let dout = out_spec.total_dim();
    if n_kraus * dout < din {
        return Err(Error::InvalidArgument(format!(
            "{n_kraus} Kraus operators of size {dout}x{din} cannot be trace preserving"
        )));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let raw: Vec<CMatrix> = (0..n_kraus)
        .map(|_| {
            CMatrix::from_fn(dout, din, |_, _| {
                Complex64::new(
                    rng.sample::<f64, _>(StandardNormal) * scale,
                    rng.sample::<f64, _>(StandardNormal) * scale,
                )
            })
        })
        .collect();
    let mut s = CMatrix::zeros(din, din);
    for m in &raw {
        s += m.adjoint() * m;
    }
    let s_op = Op::new(SystemSpec::single("_norm", din)?, s)?;
    let s_inv_half = crate::spectral::herm_power(&s_op, -0.5)?;
    let kraus: Vec<CMatrix> = raw.iter().map(|m| m * s_inv_half.matrix()).collect();
    crate::channel::Channel::new(in_spec, out_spec, kraus)
}
