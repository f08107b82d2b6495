//! Entropic quantities: sandwiched Renyi divergence and conditional entropy
//! (with the inner optimization over the conditioning state), the Petz
//! down-arrow variant, von Neumann quantities, Renyi entropy, sandwiched
//! coherent/mutual information, and scalar optimization over the order.
//!
//! All values are in nats.

use crate::density::DensityOp;
use crate::error::{Error, Result};
use crate::op::{CMatrix, Op};
use crate::spectral::{
    herm_eigen, herm_power, herm_trace_norm, support_projector, von_neumann_entropy,
};
use crate::system::SystemSpec;
use num_complex::Complex64;

const MAX_ITERATIONS: u32 = 500;
const STEP_TOL: f64 = 1e-10;

/// Result of a conditional-entropy evaluation.
#[derive(Debug, Clone)]
pub struct EntropyResult {
    /// Entropy value in nats.
    pub value: f64,
    /// Renyi order it was evaluated at.
    pub alpha: f64,
    /// Optimizing conditioning state, when an inner optimization ran.
    pub optimizer_sigma: Option<DensityOp>,
    /// Fixed-point iterations used.
    pub iterations: u32,
    pub converged: bool,
    /// Present exactly when `converged` is false or a fallback was taken.
    pub warning: Option<String>,
}

/// Sandwiched Renyi divergence
/// `D*_a(rho || sigma) = 1/(a-1) ln Tr[(sigma^{(1-a)/2a} rho sigma^{(1-a)/2a})^a]`.
///
/// For `a > 1` a support violation (`supp rho` not inside `supp sigma`)
/// yields `+inf` rather than an error. `a = 1` is rejected; use the von
/// Neumann path instead.
pub fn d_alpha_sandwiched(rho: &DensityOp, sigma: &Op, alpha: f64) -> Result<f64> {
    if rho.spec() != sigma.spec() {
        return Err(Error::SpecMismatch {
            left: rho.spec().describe(),
            right: sigma.spec().describe(),
        });
    }
    check_alpha_sandwiched_div(alpha)?;
    if alpha > 1.0 {
        let proj = support_projector(sigma)?;
        let leak = 1.0 - (proj.matrix() * rho.matrix()).trace().re;
        if leak > 1e-10 {
            return Ok(f64::INFINITY);
        }
    }
    let p = (1.0 - alpha) / (2.0 * alpha);
    let s = herm_power(sigma, p)?;
    let m = s.matrix() * rho.matrix() * s.matrix();
    let t = power_trace(&m, alpha);
    if t <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(t.ln() / (alpha - 1.0))
}

fn check_alpha_sandwiched_div(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "need alpha in (0,1) or (1,inf)",
        });
    }
    if alpha == 1.0 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "alpha = 1 is the von Neumann case; use the dedicated path",
        });
    }
    Ok(())
}

/// `Tr[M^a]` for Hermitian PSD `M`. Eigenvalues below a relative cutoff are
/// treated as the kernel, matching the support convention of `herm_power`
/// (round-off of order `1e-16` would otherwise pollute fractional powers).
fn power_trace(m: &CMatrix, alpha: f64) -> f64 {
    let evs = crate::spectral::herm_eigenvalues(m);
    let peak = evs.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = peak * 1e-14;
    evs.into_iter()
        .map(|v| if v > cutoff { v.powf(alpha) } else { 0.0 })
        .sum()
}

/// Outcome of the inner infimum over conditioning states.
struct SigmaOptimum {
    divergence: f64,
    sigma: DensityOp,
    iterations: u32,
    converged: bool,
    warning: Option<String>,
}

/// Compute `inf_sigma D*_a(rho_AB || tau_A ox sigma_B)` over densities
/// `sigma_B`, by damped fixed-point iteration
/// `sigma <- 1/2 sigma + 1/2 normalize(Tr_A[(ext rho ext)^a])`
/// starting from `rho_B`. `tau_a = None` means the identity on `A`.
///
/// The update direction is the trace-normalized `Tr_A[(sigma^p rho sigma^p)^a]`
/// itself: its fixed points are exactly the stationary points of the
/// divergence (classically this is the Arimoto optimizer
/// `sigma(b) ~ (sum_a p(a,b)^a)^{1/a}`, and for product states the true
/// marginal). Taking an extra outer `1/a` power would shift the fixed point
/// away from the optimizer.
fn inf_divergence_over_sigma(
    rho: &DensityOp,
    tau_a: Option<&Op>,
    cond: &[String],
    alpha: f64,
) -> Result<SigmaOptimum> {
    let spec = rho.spec();
    let mut b_pos = Vec::new();
    for l in cond {
        b_pos.push(spec.index_of(l)?);
    }
    b_pos.sort_unstable();
    let a_pos: Vec<usize> = (0..spec.len()).filter(|i| !b_pos.contains(i)).collect();
    let a_spec = spec.select(&a_pos);
    let b_labels: Vec<String> = b_pos.iter().map(|&i| spec.labels()[i].clone()).collect();

    let p = (1.0 - alpha) / (2.0 * alpha);
    let a_part = match tau_a {
        Some(t) => {
            if t.spec() != &a_spec {
                return Err(Error::SpecMismatch {
                    left: t.spec().describe(),
                    right: a_spec.describe(),
                });
            }
            herm_power(t, p)?
        }
        None => Op::identity(a_spec.clone()),
    };

    let order: Vec<&String> = spec.labels().iter().collect();
    let ext_of = |sigma_pow: &Op| -> Result<Op> { a_part.tensor(sigma_pow)?.permuted(&order) };
    // divergence at a given sigma, reusing the sandwich eigenvalues
    let sandwich = |sigma: &DensityOp| -> Result<(CMatrix, f64)> {
        let spow = herm_power(sigma.op(), p)?;
        let ext = ext_of(&spow)?;
        let m = ext.matrix() * rho.matrix() * ext.matrix();
        let t = power_trace(&m, alpha);
        Ok((m, t))
    };
    let divergence_of_trace = |t: f64| -> f64 {
        if t <= 0.0 {
            f64::INFINITY
        } else {
            t.ln() / (alpha - 1.0)
        }
    };

    let mut sigma = rho.partial_trace(&b_labels)?;
    let mut iterations = 0u32;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (m, t) = sandwich(&sigma)?;
        if t <= 0.0 {
            return Err(Error::InvalidArgument(
                "sandwiched trace vanished during optimization".into(),
            ));
        }
        // update direction: Tr_A[m^a], trace-normalized
        let (vals, vecs) = herm_eigen(&m);
        let n = vals.len();
        let peak = vals.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = peak * 1e-14;
        let mut diag = CMatrix::zeros(n, n);
        for (i, &v) in vals.iter().enumerate() {
            diag[(i, i)] = Complex64::new(if v > cutoff { v.powf(alpha) } else { 0.0 }, 0.0);
        }
        let m_alpha = &vecs * diag * vecs.adjoint();
        let m_alpha_op = Op::new(spec.clone(), m_alpha)?;
        let direction = m_alpha_op.partial_trace(&b_labels)?.hermitized();
        let dir_trace = direction.trace().re;
        if dir_trace <= 0.0 {
            return Err(Error::InvalidArgument(
                "degenerate update direction in sigma optimization".into(),
            ));
        }
        let direction = direction.scale_re(1.0 / dir_trace);
        let next = &sigma.op().scale_re(0.5) + &direction.scale_re(0.5);
        let step = 0.5 * herm_trace_norm(&(next.matrix() - sigma.matrix()));
        sigma = DensityOp::new_unchecked(next);
        if step < STEP_TOL {
            converged = true;
            break;
        }
    }

    let (_, t) = sandwich(&sigma)?;
    let mut best = SigmaOptimum {
        divergence: divergence_of_trace(t),
        sigma,
        iterations,
        converged,
        warning: None,
    };

    if !converged {
        let dim_b = spec
            .dims()
            .iter()
            .enumerate()
            .filter(|(i, _)| b_pos.contains(i))
            .map(|(_, &d)| d)
            .product::<usize>();
        if dim_b == 2 {
            // exhaustive Bloch-ball fallback
            let b_spec = spec.select(&b_pos);
            let mut grid_best: Option<(f64, DensityOp)> = None;
            for sigma in bloch_grid(&b_spec, 0.01, 1000) {
                let (_, t) = sandwich(&sigma)?;
                let d = divergence_of_trace(t);
                if grid_best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    grid_best = Some((d, sigma));
                }
            }
            if let Some((d, s)) = grid_best {
                if d < best.divergence {
                    best.divergence = d;
                    best.sigma = s;
                }
                best.converged = true;
                best.warning = Some(
                    "fixed point hit the iteration cap; exhaustive Bloch-grid fallback used".into(),
                );
            }
        } else {
            best.warning = Some(format!(
                "sigma optimization did not converge in {MAX_ITERATIONS} iterations"
            ));
        }
    }
    Ok(best)
}

/// Deterministic grid over the Bloch ball: `sigma = (I + r n.vec sigma)/2`
/// with `r` stepped by `r_step` in `[0,1)` and `n` on a Fibonacci sphere.
fn bloch_grid(spec: &SystemSpec, r_step: f64, n_dirs: usize) -> Vec<DensityOp> {
    let dirs = fibonacci_sphere(n_dirs);
    let mut out = Vec::new();
    let mut r = 0.0;
    while r < 1.0 {
        if r == 0.0 {
            out.push(DensityOp::maximally_mixed(spec.clone()));
        } else {
            for &(x, y, z) in &dirs {
                let m = CMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        Complex64::new(0.5 * (1.0 + r * z), 0.0),
                        Complex64::new(0.5 * r * x, -0.5 * r * y),
                        Complex64::new(0.5 * r * x, 0.5 * r * y),
                        Complex64::new(0.5 * (1.0 - r * z), 0.0),
                    ],
                );
                out.push(DensityOp::new_unchecked(
                    Op::new(spec.clone(), m).expect("2x2"),
                ));
            }
        }
        r += r_step;
    }
    out
}

/// Evenly spread unit vectors.
pub fn fibonacci_sphere(n: usize) -> Vec<(f64, f64, f64)> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * i as f64;
            (r * theta.cos(), r * theta.sin(), z)
        })
        .collect()
}

/// Order-`a` sandwiched conditional entropy
/// `H*_a(A|B) = - inf_sigma D*_a(rho_AB || I_A ox sigma_B)`, where `cond`
/// names the `B` factors. `a = 1` dispatches to the von Neumann formula.
pub fn h_cond_sandwiched<S: AsRef<str>>(
    rho: &DensityOp,
    cond: &[S],
    alpha: f64,
) -> Result<EntropyResult> {
    let cond: Vec<String> = cond.iter().map(|s| s.as_ref().to_string()).collect();
    if alpha == 1.0 {
        let value = h_cond_vn(rho, &cond)?;
        let optimizer = rho.partial_trace(&cond)?;
        return Ok(EntropyResult {
            value,
            alpha,
            optimizer_sigma: Some(optimizer),
            iterations: 0,
            converged: true,
            warning: None,
        });
    }
    if !alpha.is_finite() || alpha <= 0.5 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "sandwiched conditional entropy needs alpha in (1/2, inf)",
        });
    }
    let opt = inf_divergence_over_sigma(rho, None, &cond, alpha)?;
    Ok(EntropyResult {
        value: -opt.divergence,
        alpha,
        optimizer_sigma: Some(opt.sigma),
        iterations: opt.iterations,
        converged: opt.converged,
        warning: opt.warning,
    })
}

/// Petz (down-arrow) Renyi conditional entropy
/// `H^v_a(A|B) = 1/(1-a) ln Tr[rho_AB^a (I_A ox rho_B)^{1-a}]` with powers
/// taken on supports. `a = 1` dispatches to the von Neumann formula.
pub fn h_cond_petz_down<S: AsRef<str>>(rho: &DensityOp, cond: &[S], alpha: f64) -> Result<f64> {
    let cond: Vec<String> = cond.iter().map(|s| s.as_ref().to_string()).collect();
    if alpha == 1.0 {
        return h_cond_vn(rho, &cond);
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "need alpha in (0,1) or (1,inf)",
        });
    }
    let spec = rho.spec();
    let mut b_pos = Vec::new();
    for l in &cond {
        b_pos.push(spec.index_of(l)?);
    }
    b_pos.sort_unstable();
    let a_pos: Vec<usize> = (0..spec.len()).filter(|i| !b_pos.contains(i)).collect();
    let a_spec = spec.select(&a_pos);
    let rho_b = rho.partial_trace(&cond)?;
    let rho_alpha = herm_power(rho.op(), alpha)?;
    let b_pow = herm_power(rho_b.op(), 1.0 - alpha)?;
    let order: Vec<&String> = spec.labels().iter().collect();
    let ext = Op::identity(a_spec).tensor(&b_pow)?.permuted(&order)?;
    let t = (rho_alpha.matrix() * ext.matrix()).trace().re;
    if t <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(t.ln() / (1.0 - alpha))
}

/// Von Neumann conditional entropy `H(A|B) = S(AB) - S(B)` in nats.
pub fn h_cond_vn<S: AsRef<str>>(rho: &DensityOp, cond: &[S]) -> Result<f64> {
    let rho_b = rho.partial_trace(cond)?;
    Ok(von_neumann_entropy(rho.matrix()) - von_neumann_entropy(rho_b.matrix()))
}

/// Renyi entropy `H_a(rho) = 1/(1-a) ln Tr rho^a`; `a = 1` is the von
/// Neumann entropy.
pub fn renyi_entropy(rho: &DensityOp, alpha: f64) -> Result<f64> {
    if alpha == 1.0 {
        return Ok(von_neumann_entropy(rho.matrix()));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "need alpha in (0,1) or (1,inf)",
        });
    }
    let t = power_trace(rho.matrix(), alpha);
    Ok(t.ln() / (1.0 - alpha))
}

/// Sandwiched Renyi coherent information `I*_b(A>B) = -H*_b(A|B)`, with
/// `cond` naming the `B` factors.
pub fn coherent_info_sandwiched<S: AsRef<str>>(
    rho: &DensityOp,
    cond: &[S],
    beta: f64,
) -> Result<f64> {
    Ok(-h_cond_sandwiched(rho, cond, beta)?.value)
}

/// Sandwiched Renyi mutual information
/// `I*_a(A:C) = inf_sigma D*_a(omega || omega_A ox sigma_C)`, with `cond`
/// naming the `C` factors. `a = 1` gives the von Neumann mutual information.
pub fn mutual_info_sandwiched<S: AsRef<str>>(
    omega: &DensityOp,
    cond: &[S],
    alpha: f64,
) -> Result<f64> {
    let cond: Vec<String> = cond.iter().map(|s| s.as_ref().to_string()).collect();
    let spec = omega.spec();
    let a_labels: Vec<&String> = spec.labels().iter().filter(|l| !cond.contains(l)).collect();
    if alpha == 1.0 {
        let s_a = von_neumann_entropy(omega.partial_trace(&a_labels)?.matrix());
        let s_c = von_neumann_entropy(omega.partial_trace(&cond)?.matrix());
        let s_ac = von_neumann_entropy(omega.matrix());
        return Ok(s_a + s_c - s_ac);
    }
    if !alpha.is_finite() || alpha <= 0.5 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "sandwiched mutual information needs alpha in (1/2, inf)",
        });
    }
    let tau_a = omega.partial_trace(&a_labels)?;
    let opt = inf_divergence_over_sigma(omega, Some(tau_a.op()), &cond, alpha)?;
    Ok(opt.divergence)
}

/// Maximize a scalar function on `[lo, hi]`: a 33-point coarse grid followed
/// by golden-section refinement (to bracket width `1e-5`) around the best
/// grid cell. The returned value dominates every probe made.
pub fn sup_over_alpha<F>(mut f: F, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "need lo < hi (got [{lo}, {hi}])"
        )));
    }
    const GRID: usize = 33;
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut best_alpha = lo;
    let mut best_val = f64::NEG_INFINITY;
    let mut probe = |alpha: f64, best_alpha: &mut f64, best_val: &mut f64| -> Result<f64> {
        let v = f(alpha)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective(alpha));
        }
        if v > *best_val {
            *best_val = v;
            *best_alpha = alpha;
        }
        Ok(v)
    };
    for i in 0..GRID {
        let alpha = if i == GRID - 1 {
            hi
        } else {
            lo + i as f64 * step
        };
        probe(alpha, &mut best_alpha, &mut best_val)?;
    }
    let mut a = (best_alpha - step).max(lo);
    let mut b = (best_alpha + step).min(hi);
    let invphi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - invphi * (b - a);
    let mut x2 = a + invphi * (b - a);
    let mut f1 = probe(x1, &mut best_alpha, &mut best_val)?;
    let mut f2 = probe(x2, &mut best_alpha, &mut best_val)?;
    while b - a > 1e-5 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = probe(x2, &mut best_alpha, &mut best_val)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = probe(x1, &mut best_alpha, &mut best_val)?;
        }
    }
    Ok((best_alpha, best_val))
}
