//! One-shot quantum coding bounds: the delta error terms for general input
//! states, (Q, E)-rate reports with the achievable-region test, the region
//! boundary tabulation, and the pure-state entropy duality used in the
//! proofs.

use crate::channel::Channel;
use crate::density::DensityOp;
use crate::entropy::{h_cond_sandwiched, h_cond_vn, renyi_entropy, sup_over_alpha};
use crate::error::{Error, Result};
use crate::system::SystemSpec;

const PURITY_TOL: f64 = 1e-9;
const LN2: f64 = std::f64::consts::LN_2;

/// Code rates: `Q` qubits transmitted, `E` ebits consumed. Stored in bits,
/// converted to nats internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeParams {
    q_bits: f64,
    e_bits: f64,
}

impl CodeParams {
    pub fn new(q_bits: f64, e_bits: f64) -> Result<Self> {
        if !(q_bits.is_finite() && e_bits.is_finite() && q_bits >= 0.0 && e_bits >= 0.0) {
            return Err(Error::InvalidArgument(
                "rates must be finite and non-negative".into(),
            ));
        }
        Ok(CodeParams { q_bits, e_bits })
    }

    pub fn q_bits(&self) -> f64 {
        self.q_bits
    }

    pub fn e_bits(&self) -> f64 {
        self.e_bits
    }

    pub fn q_nats(&self) -> f64 {
        self.q_bits * LN2
    }

    pub fn e_nats(&self) -> f64 {
        self.e_bits * LN2
    }
}

/// Evaluated coding bounds at a rate pair.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CodingReport {
    pub delta1: f64,
    pub delta2: f64,
    /// `sqrt(2 sqrt(2 delta1) + 2 delta2)`.
    pub epsilon_bound: f64,
    /// Optimizer of the delta1 exponent.
    pub alpha_star: f64,
    /// Optimizer of the delta2 exponent, reported in the coherent-information
    /// order `b = a/(2a-1)` in `[2/3, 1]`.
    pub beta_star: f64,
    pub in_region: bool,
}

impl CodingReport {
    pub fn from_deltas(
        delta1: f64,
        delta2: f64,
        alpha_star: f64,
        beta_star: f64,
        in_region: bool,
    ) -> Self {
        CodingReport {
            delta1,
            delta2,
            epsilon_bound: (2.0 * (2.0 * delta1).sqrt() + 2.0 * delta2).sqrt(),
            alpha_star,
            beta_star,
            in_region,
        }
    }
}

fn dual_order(alpha: f64) -> f64 {
    alpha / (2.0 * alpha - 1.0)
}

fn fresh_label(base: &str, taken: &[&SystemSpec]) -> String {
    let mut candidate = base.to_string();
    while taken.iter().any(|s| s.contains(&candidate)) {
        candidate.push('x');
    }
    candidate
}

/// Split a pure bipartite channel-input state `sigma` into its reference
/// block (prefix) and the channel-input block (suffix); the channel input
/// labels must appear as the trailing factors of `sigma`.
fn split_reference(sigma: &DensityOp, channel: &Channel) -> Result<Vec<String>> {
    let labels = sigma.spec().labels();
    let n_in = channel.in_spec().len();
    if labels.len() < n_in {
        return Err(Error::SpecMismatch {
            left: channel.in_spec().describe(),
            right: sigma.spec().describe(),
        });
    }
    let split = labels.len() - n_in;
    if labels[split..] != *channel.in_spec().labels()
        || sigma.spec().dims()[split..] != *channel.in_spec().dims()
    {
        return Err(Error::SpecMismatch {
            left: channel.in_spec().describe(),
            right: sigma.spec().describe(),
        });
    }
    Ok(labels[..split].to_vec())
}

/// Error terms `(delta1, delta2)` of the one-shot coding bound for a pure
/// input `psi` (with the transmitted block `a_labels` and reference
/// `r_labels`) sent through `channel` with pure test state `sigma` on
/// `(A'', A')`; `A'` is the channel input (trailing factors of `sigma`) and
/// `A''` a copy of it.
///
/// `delta1 = 6 exp(-sup_{a in [1,2]} (a-1)/a (H_a(A'')_omega - H_{a/(2a-1)}(A)_psi))`
/// `delta2 = 6 exp(-sup_{b in [1,2]} (b-1)/b (H*_b(A''|E)_omega + H*_b(A|R)_psi))`
///
/// with `omega` the Stinespring output of `sigma`.
pub fn coding_bounds_general<S: AsRef<str>, T: AsRef<str>>(
    psi: &DensityOp,
    a_labels: &[S],
    r_labels: &[T],
    channel: &Channel,
    sigma: &DensityOp,
) -> Result<(f64, f64)> {
    psi.require_pure(PURITY_TOL)?;
    sigma.require_pure(PURITY_TOL)?;
    let a_labels: Vec<String> = a_labels.iter().map(|s| s.as_ref().to_string()).collect();
    let r_labels: Vec<String> = r_labels.iter().map(|s| s.as_ref().to_string()).collect();
    let ref_labels = split_reference(sigma, channel)?;
    let dim_ref: usize = sigma.spec().dim_of_labels(&ref_labels)?;
    if dim_ref != channel.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "reference block has dimension {dim_ref}, channel input {}",
            channel.dim_in()
        )));
    }

    let env = fresh_label("Ec", &[sigma.spec(), channel.out_spec(), psi.spec()]);
    let dilation = channel.stinespring(env.clone())?;
    let first_in = channel.in_spec().labels()[0].clone();
    let omega = dilation.apply_at(sigma, &first_in)?;

    let omega_ref = omega.partial_trace(&ref_labels)?;
    let psi_a = psi.partial_trace(&a_labels)?;
    let (alpha1, exp1) = sup_over_alpha(
        |alpha| {
            let h_out = renyi_entropy(&omega_ref, alpha)?;
            let h_in = renyi_entropy(&psi_a, dual_order(alpha))?;
            Ok((alpha - 1.0) / alpha * (h_out - h_in))
        },
        1.0,
        2.0,
    )?;
    let _ = alpha1;

    let mut keep: Vec<String> = ref_labels.clone();
    keep.push(env.clone());
    let omega_ae = omega.partial_trace(&keep)?;
    let mut psi_ar = a_labels.clone();
    psi_ar.extend(r_labels.iter().cloned());
    let psi_ar = psi.partial_trace(&psi_ar)?;
    let (_, exp2) = sup_over_alpha(
        |beta| {
            let h_env = h_cond_sandwiched(&omega_ae, std::slice::from_ref(&env), beta)?.value;
            let h_ref = h_cond_sandwiched(&psi_ar, &r_labels, beta)?.value;
            Ok((beta - 1.0) / beta * (h_env + h_ref))
        },
        1.0,
        2.0,
    )?;

    Ok((6.0 * (-exp1).exp(), 6.0 * (-exp2).exp()))
}

/// Rate-pair coding report for `channel` with pure test state `sigma` on
/// `(A, A')` (channel input trailing):
///
/// `delta1 = 6 exp(-sup_{a in [1,2]} (a-1)/a (H_a(A)_sigma - (Q+E)))`
/// `delta2 = 6 exp(-sup_{b in [2/3,1]} (1-b)/b (I*_b(A>C)_{N(sigma)} - (Q-E)))`
///
/// The `delta2` supremum runs over the dual order `a in [1,2]` with
/// `b = a/(2a-1)`, for which `(1-b)/b = (a-1)/a`.
pub fn coding_bounds_rates(
    channel: &Channel,
    sigma: &DensityOp,
    params: CodeParams,
) -> Result<CodingReport> {
    sigma.require_pure(PURITY_TOL)?;
    let a_labels = split_reference(sigma, channel)?;
    let q = params.q_nats();
    let e = params.e_nats();

    let sigma_a = sigma.partial_trace(&a_labels)?;
    let (alpha1, exp1) = sup_over_alpha(
        |alpha| Ok((alpha - 1.0) / alpha * (renyi_entropy(&sigma_a, alpha)? - (q + e))),
        1.0,
        2.0,
    )?;
    let delta1 = 6.0 * (-exp1).exp();

    let ns = apply_to_trailing(channel, sigma)?;
    let c_labels: Vec<String> = channel.out_spec().labels().to_vec();
    let (alpha2, exp2) = sup_over_alpha(
        |alpha| {
            let beta = dual_order(alpha);
            let coherent = -h_cond_sandwiched(&ns, &c_labels, beta)?.value;
            Ok((alpha - 1.0) / alpha * (coherent - (q - e)))
        },
        1.0,
        2.0,
    )?;
    let delta2 = 6.0 * (-exp2).exp();

    let h_a = renyi_entropy(&sigma_a, 1.0)?;
    let coherent_vn = -h_cond_vn(&ns, &c_labels)?;
    let in_region = q + e < h_a && q - e < coherent_vn;
    Ok(CodingReport::from_deltas(
        delta1,
        delta2,
        alpha1,
        dual_order(alpha2),
        in_region,
    ))
}

/// Apply a channel whose input labels are the trailing factors of `rho`.
fn apply_to_trailing(channel: &Channel, rho: &DensityOp) -> Result<DensityOp> {
    let labels = rho.spec().labels();
    let split = labels.len() - channel.in_spec().len();
    let mut order: Vec<String> = labels[split..].to_vec();
    order.extend(labels[..split].iter().cloned());
    let permuted = rho.permuted(&order)?;
    let out = channel.apply(&permuted)?;
    // back to (passive.., C..)
    let mut back: Vec<String> = labels[..split].to_vec();
    back.extend(channel.out_spec().labels().iter().cloned());
    out.permuted(&back)
}

/// Achievable-region boundary: for each entanglement rate `E` (nats) the
/// largest `Q` with `Q + E < H(A)` and `Q - E < I(A>C)`, clipped at zero.
pub fn region_boundary(
    channel: &Channel,
    sigma: &DensityOp,
    e_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    sigma.require_pure(PURITY_TOL)?;
    let a_labels = split_reference(sigma, channel)?;
    if e_grid.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::InvalidArgument(
            "entanglement rates must be >= 0".into(),
        ));
    }
    let h_a = renyi_entropy(&sigma.partial_trace(&a_labels)?, 1.0)?;
    let ns = apply_to_trailing(channel, sigma)?;
    let coherent = -h_cond_vn(&ns, channel.out_spec().labels())?;
    Ok(e_grid
        .iter()
        .map(|&e| (e, (h_a - e).min(coherent + e).max(0.0)))
        .collect())
}

/// Duality defect `H*_a(A|B)_phi + H*_{a/(2a-1)}(A|C)_phi` for a pure
/// tripartite state; vanishes for exact optimizers.
pub fn purestate_duality_gap<S: AsRef<str>, T: AsRef<str>, U: AsRef<str>>(
    phi: &DensityOp,
    a_labels: &[S],
    b_labels: &[T],
    c_labels: &[U],
    alpha: f64,
) -> Result<f64> {
    phi.require_pure(PURITY_TOL)?;
    if !alpha.is_finite() || alpha <= 0.5 {
        return Err(Error::InvalidAlpha {
            alpha,
            reason: "duality holds for alpha in (1/2, inf); the infinite endpoint is out of scope",
        });
    }
    let a: Vec<String> = a_labels.iter().map(|s| s.as_ref().to_string()).collect();
    let b: Vec<String> = b_labels.iter().map(|s| s.as_ref().to_string()).collect();
    let c: Vec<String> = c_labels.iter().map(|s| s.as_ref().to_string()).collect();
    if a.len() + b.len() + c.len() != phi.spec().len() {
        return Err(Error::InvalidArgument(
            "labels must partition the tripartite state".into(),
        ));
    }
    let mut ab = a.clone();
    ab.extend(b.iter().cloned());
    let phi_ab = phi.partial_trace(&ab)?;
    let mut ac = a.clone();
    ac.extend(c.iter().cloned());
    let phi_ac = phi.partial_trace(&ac)?;
    let h_ab = h_cond_sandwiched(&phi_ab, &b, alpha)?.value;
    let h_ac = h_cond_sandwiched(&phi_ac, &c, dual_order(alpha))?.value;
    Ok(h_ab + h_ac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{random_channel, random_pure};
    use crate::op::CMatrix;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit_id() -> Channel {
        Channel::identity(SystemSpec::single("A'", 2).unwrap())
    }

    fn phi_aaprime() -> DensityOp {
        DensityOp::max_entangled_pair("A", "A'", 2).unwrap()
    }

    #[test]
    fn rates_identity_channel_origin_is_achievable() {
        let report = coding_bounds_rates(
            &qubit_id(),
            &phi_aaprime(),
            CodeParams::new(0.0, 0.0).unwrap(),
        )
        .unwrap();
        assert!(report.in_region);
        // both exponents positive means both deltas strictly below 6
        assert!(report.delta1 < 6.0);
        assert!(report.delta2 < 6.0);
        assert!(
            (report.epsilon_bound
                - (2.0 * (2.0 * report.delta1).sqrt() + 2.0 * report.delta2).sqrt())
            .abs()
                < 1e-12
        );
        assert!(report.beta_star >= 2.0 / 3.0 - 1e-9 && report.beta_star <= 1.0 + 1e-9);
    }

    #[test]
    fn rates_delta1_saturates_at_boundary() {
        // Q + E = H(A): the sup is attained at a -> 1 with value 0, delta1 = 6
        let sigma = phi_aaprime();
        let h_bits = renyi_entropy(&sigma.partial_trace(&["A"]).unwrap(), 1.0).unwrap() / LN2;
        let report =
            coding_bounds_rates(&qubit_id(), &sigma, CodeParams::new(h_bits, 0.0).unwrap())
                .unwrap();
        assert!((report.delta1 - 6.0).abs() < 1e-9, "{}", report.delta1);
        assert!(!report.in_region);
    }

    #[test]
    fn region_criterion_matches_exponent_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(111);
        let mut checked = 0;
        while checked < 30 {
            let t = random_channel(
                SystemSpec::single("A'", 2).unwrap(),
                SystemSpec::single("C", 2).unwrap(),
                2,
                &mut rng,
            )
            .unwrap();
            let sigma = random_pure(SystemSpec::new([("A", 2), ("A'", 2)]).unwrap(), &mut rng);
            let a_labels = ["A"];
            let h_a = renyi_entropy(&sigma.partial_trace(&a_labels).unwrap(), 1.0).unwrap();
            let ns = apply_to_trailing(&t, &sigma).unwrap();
            let coh = -h_cond_vn(&ns, &["C"]).unwrap();
            use rand::Rng;
            let q_bits: f64 = rng.gen::<f64>() * 1.2;
            let e_bits: f64 = rng.gen::<f64>() * 0.8;
            let q = q_bits * LN2;
            let e = e_bits * LN2;
            // skip near-boundary rate pairs
            if (q + e - h_a).abs() < 1e-3 || (q - e - coh).abs() < 1e-3 {
                continue;
            }
            checked += 1;
            let report =
                coding_bounds_rates(&t, &sigma, CodeParams::new(q_bits, e_bits).unwrap()).unwrap();
            let expect = q + e < h_a && q - e < coh;
            assert_eq!(report.in_region, expect);
            // positivity of both exponents iff in the region
            let both_positive = report.delta1 < 6.0 - 1e-9 && report.delta2 < 6.0 - 1e-9;
            assert_eq!(both_positive, expect, "q={q_bits} e={e_bits}");
        }
    }

    #[test]
    fn epsilon_bound_monotone_in_q() {
        let sigma = phi_aaprime();
        let t = qubit_id();
        let mut last = 0.0;
        for i in 0..6 {
            let q = i as f64 * 0.2;
            let rep = coding_bounds_rates(&t, &sigma, CodeParams::new(q, 0.1).unwrap()).unwrap();
            assert!(rep.epsilon_bound >= last - 1e-12, "not monotone at q={q}");
            last = rep.epsilon_bound;
        }
    }

    #[test]
    fn delta1_branch_monotone_in_e_across_crossing() {
        // at fixed Q, raising E pushes Q+E across H(A): delta1 never decreases
        // and saturates at 6 once past the boundary
        let sigma = phi_aaprime();
        let t = qubit_id();
        let mut last = 0.0;
        for i in 0..8 {
            let e = i as f64 * 0.25;
            let rep = coding_bounds_rates(&t, &sigma, CodeParams::new(0.4, e).unwrap()).unwrap();
            assert!(rep.delta1 >= last - 1e-12, "delta1 dropped at e={e}");
            last = rep.delta1;
        }
        assert!((last - 6.0).abs() < 1e-9);
    }

    #[test]
    fn code_params_reject_bad_rates() {
        assert!(CodeParams::new(-0.1, 0.0).is_err());
        assert!(CodeParams::new(0.0, f64::NAN).is_err());
        assert!(CodeParams::new(0.5, 0.25).is_ok());
    }

    #[test]
    fn deltas_live_in_unit_interval_times_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(112);
        for _ in 0..5 {
            let t = random_channel(
                SystemSpec::single("A'", 2).unwrap(),
                SystemSpec::single("C", 2).unwrap(),
                2,
                &mut rng,
            )
            .unwrap();
            let sigma = random_pure(SystemSpec::new([("A", 2), ("A'", 2)]).unwrap(), &mut rng);
            use rand::Rng;
            let rep = coding_bounds_rates(
                &t,
                &sigma,
                CodeParams::new(rng.gen::<f64>(), rng.gen::<f64>()).unwrap(),
            )
            .unwrap();
            assert!(rep.delta1 > 0.0 && rep.delta1 <= 6.0);
            assert!(rep.delta2 > 0.0 && rep.delta2 <= 6.0);
        }
    }

    #[test]
    fn general_bounds_reduce_for_trivial_environment() {
        // identity channel: E is trivial, H*_b(A''|E) = H_b(A'')
        let t = qubit_id();
        let sigma = DensityOp::max_entangled_pair("A''", "A'", 2).unwrap();
        // psi = Phi_RM with A = M
        let psi = DensityOp::max_entangled_pair("M", "R", 2).unwrap();
        let (d1, d2) = coding_bounds_general(&psi, &["M"], &["R"], &t, &sigma).unwrap();
        // H_a(A'') = ln 2 and H_dual(psi_M) = ln 2: exponent 0, delta1 = 6
        assert!((d1 - 6.0).abs() < 1e-9, "{d1}");
        // H*_b(A''|E) = ln 2, H*_b(M|R)_Phi = -ln 2: exponent 0, delta2 = 6
        assert!((d2 - 6.0).abs() < 1e-9, "{d2}");
    }

    #[test]
    fn general_bounds_finite_for_dephasing_channel() {
        let spec = SystemSpec::single("A'", 2).unwrap();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let k0 = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(half, 0.0),
            ],
        );
        let k1 = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(half, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-half, 0.0),
            ],
        );
        let t = Channel::new(spec.clone(), spec, vec![k0, k1]).unwrap();
        let sigma = DensityOp::max_entangled_pair("A''", "A'", 2).unwrap();
        let psi = DensityOp::max_entangled_pair("M", "R", 2).unwrap();
        let (d1, d2) = coding_bounds_general(&psi, &["M"], &["R"], &t, &sigma).unwrap();
        assert!(d1 > 0.0 && d1 <= 6.0, "delta1 = {d1}");
        assert!(d2 > 0.0 && d2 <= 6.0, "delta2 = {d2}");
    }

    #[test]
    fn rates_match_general_under_proof_substitution() {
        // psi = Phi_RM ox Phi_AtB with A = (At, M); identity qubit channel,
        // sigma = Phi. Checked at (Q, E) = (1, 0) and (1, 1).
        let t = qubit_id();
        let sigma = DensityOp::max_entangled_pair("A", "A'", 2).unwrap();
        let sigma_gen = DensityOp::max_entangled_pair("A''", "A'", 2).unwrap();

        // (Q, E) = (1, 0): At and B are trivial
        let psi = DensityOp::max_entangled_pair("M", "R", 2).unwrap();
        let report = coding_bounds_rates(&t, &sigma, CodeParams::new(1.0, 0.0).unwrap()).unwrap();
        let (d1, d2) = coding_bounds_general(&psi, &["M"], &["R"], &t, &sigma_gen).unwrap();
        assert!(
            (report.delta1 - d1).abs() < 1e-6,
            "{} vs {d1}",
            report.delta1
        );
        assert!(
            (report.delta2 - d2).abs() < 1e-6,
            "{} vs {d2}",
            report.delta2
        );

        // (Q, E) = (1, 1): psi = Phi_RM ox Phi_{At B}, A = (At, M)
        let psi = DensityOp::max_entangled_pair("M", "R", 2)
            .unwrap()
            .tensor(&DensityOp::max_entangled_pair("At", "B", 2).unwrap())
            .unwrap();
        let report = coding_bounds_rates(&t, &sigma, CodeParams::new(1.0, 1.0).unwrap()).unwrap();
        let (d1, d2) = coding_bounds_general(&psi, &["At", "M"], &["R"], &t, &sigma_gen).unwrap();
        assert!((report.delta1 - d1).abs() < 1e-6);
        assert!((report.delta2 - d2).abs() < 1e-6);
    }

    #[test]
    fn region_boundary_identity_channel() {
        let t = qubit_id();
        let sigma = phi_aaprime();
        let rows = region_boundary(&t, &sigma, &[0.0]).unwrap();
        assert!((rows[0].1 - LN2).abs() < 1e-12);
        // large E: the H(A) - E branch decreases to zero
        let rows = region_boundary(&t, &sigma, &[2.0 * LN2, 10.0]).unwrap();
        assert!(rows[0].1 < LN2);
        assert_eq!(rows[1].1, 0.0);
        // unlimited E: max over E of Q_max equals I(A:C)/2
        let h_a = LN2;
        let coh = LN2;
        let crossing = (h_a - coh) / 2.0;
        let rows = region_boundary(&t, &sigma, &[crossing]).unwrap();
        let mutual = 2.0 * LN2; // I(A:C) for the identity channel on Phi
        assert!((rows[0].1 - 0.5 * mutual).abs() < 1e-9);
    }

    #[test]
    fn duality_gap_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        // von Neumann case: H(A|B) = -H(A|C) for pure states
        let phi = random_pure(
            SystemSpec::new([("A", 2), ("B", 2), ("C", 2)]).unwrap(),
            &mut rng,
        );
        let gap = purestate_duality_gap(&phi, &["A"], &["B"], &["C"], 1.0).unwrap();
        assert!(gap.abs() < 1e-10, "vn gap {gap}");
        // alpha = 2 against its dual 2/3
        let gap = purestate_duality_gap(&phi, &["A"], &["B"], &["C"], 2.0).unwrap();
        assert!(gap.abs() < 1e-6, "alpha=2 gap {gap}");
        // GHZ-type state at alpha = 1.5
        let mut amps = vec![Complex64::new(0.0, 0.0); 8];
        amps[0] = Complex64::new(1.0, 0.0);
        amps[7] = Complex64::new(1.0, 0.0);
        let ghz = DensityOp::pure_state(
            SystemSpec::new([("A", 2), ("B", 2), ("C", 2)]).unwrap(),
            &amps,
        )
        .unwrap();
        let gap = purestate_duality_gap(&ghz, &["A"], &["B"], &["C"], 1.5).unwrap();
        assert!(gap.abs() < 1e-6, "GHZ gap {gap}");
        // mixed states are rejected
        let mixed =
            DensityOp::maximally_mixed(SystemSpec::new([("A", 2), ("B", 2), ("C", 2)]).unwrap());
        assert!(purestate_duality_gap(&mixed, &["A"], &["B"], &["C"], 2.0).is_err());
    }
}
