//! Cross-module property tests: structural invariants of the tensor algebra
//! under randomized inputs, plus the exact decoupling-map identities.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rdl_core::channel::depolarize_ea;
use rdl_core::density::trace_distance;
use rdl_core::haar::{random_density, sample_haar, theta_map};
use rdl_core::json::OperatorJson;
use rdl_core::spectral::{herm_power, schatten_norm};
use rdl_core::{CMatrix, DensityOp, Op, SystemSpec};

fn complex_matrix(d: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |entries| {
        CMatrix::from_fn(d, d, |r, c| {
            let (re, im) = entries[r * d + c];
            Complex64::new(re, im)
        })
    })
}

fn hermitian_op(label: &'static str, d: usize) -> impl Strategy<Value = Op> {
    complex_matrix(d).prop_map(move |m| {
        Op::new(SystemSpec::single(label, d).unwrap(), m)
            .unwrap()
            .hermitized()
    })
}

fn psd_op(label: &'static str, d: usize) -> impl Strategy<Value = Op> {
    complex_matrix(d).prop_map(move |m| {
        Op::new(SystemSpec::single(label, d).unwrap(), &m * m.adjoint()).unwrap()
    })
}

fn density(label: &'static str, d: usize) -> impl Strategy<Value = DensityOp> {
    prop::num::u64::ANY.prop_map(move |seed| {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        random_density(SystemSpec::single(label, d).unwrap(), &mut rng)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schatten_norms_monotone_in_order(x in hermitian_op("A", 5)) {
        // p <= q implies ||X||_p >= ||X||_q
        let orders = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];
        let norms: Vec<f64> = orders.iter().map(|&p| schatten_norm(&x, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[0] >= w[1] - 1e-10);
        }
    }

    #[test]
    fn partial_trace_preserves_trace(m in complex_matrix(12)) {
        let spec = SystemSpec::new([("A", 3), ("B", 4)]).unwrap();
        let x = Op::new(spec, m).unwrap();
        let ta = x.partial_trace(&["B"]).unwrap();
        prop_assert!((x.trace() - ta.trace()).norm() < 1e-12);
        let tb = x.partial_trace(&["A"]).unwrap();
        prop_assert!((x.trace() - tb.trace()).norm() < 1e-12);
    }

    #[test]
    fn trace_distance_triangle(a in density("A", 4), b in density("A", 4), c in density("A", 4)) {
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
    }

    #[test]
    fn herm_power_one_is_identity_map(x in psd_op("A", 4)) {
        let y = herm_power(&x, 1.0).unwrap();
        prop_assert!(y.max_abs_diff(&x) < 1e-12 * (1.0 + x.matrix().norm()));
    }

    #[test]
    fn tensor_partial_trace_adjoint(a in complex_matrix(3), y in complex_matrix(12)) {
        // Tr[(a ox I) y] = Tr[a Tr_B y]
        let a = Op::new(SystemSpec::single("A", 3).unwrap(), a).unwrap();
        let y = Op::new(SystemSpec::new([("A", 3), ("B", 4)]).unwrap(), y).unwrap();
        let lhs = (a.tensor(&Op::identity(SystemSpec::single("B", 4).unwrap())).unwrap().matrix()
            * y.matrix())
        .trace();
        let rhs = (a.matrix() * y.partial_trace(&["A"]).unwrap().matrix()).trace();
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn operator_json_roundtrip_bit_exact(m in complex_matrix(4)) {
        let op = Op::new(SystemSpec::new([("A", 2), ("B", 2)]).unwrap(), m).unwrap();
        let text = serde_json::to_string(&OperatorJson::from_op(&op)).unwrap();
        let back: OperatorJson = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_op().unwrap().max_abs_diff(&op), 0.0);
    }

    #[test]
    fn permutation_preserves_spectrum(m in complex_matrix(8)) {
        let spec = SystemSpec::new([("A", 2), ("B", 2), ("C", 2)]).unwrap();
        let x = Op::new(spec, m).unwrap().hermitized();
        let y = x.permuted(&["C", "A", "B"]).unwrap();
        let mut ex = rdl_core::spectral::herm_eigenvalues(x.matrix());
        let mut ey = rdl_core::spectral::herm_eigenvalues(y.matrix());
        ex.sort_by(|p, q| p.partial_cmp(q).unwrap());
        ey.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for (p, q) in ex.iter().zip(&ey) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }
}

#[test]
fn theta_map_preserves_trace_exactly() {
    // Tr Theta(Y)(U) equals Tr Y after depolarizing on A, for every U;
    // averaging over U is the first-moment twirl, so this is the exact form
    // of the Haar-average trace identity.
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
    let spec = SystemSpec::new([("A'", 2), ("A", 2), ("C", 3)]).unwrap();
    use rand::Rng;
    let y = Op::new(
        spec.clone(),
        CMatrix::from_fn(12, 12, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }),
    )
    .unwrap();
    let depolarized = depolarize_ea(&y, "A").unwrap();
    for i in 0..10 {
        let u = sample_haar(2, 3, 0, i);
        let th = theta_map(&depolarized, &u).unwrap();
        assert!((th.trace() - y.trace()).norm() < 1e-10);
    }
    // and the Haar mean of Theta itself is the phi-contraction of E_A(Y)
    let mean = depolarized.phi_contract().unwrap();
    assert!((mean.trace() - y.trace()).norm() < 1e-10);
}

#[test]
fn mc_operator_estimate_is_reproducible() {
    use rdl_core::haar::mc_operator_expectation;
    let f = |u: &CMatrix| {
        Op::new(
            SystemSpec::single("A", 2).unwrap(),
            u * DMatrix::from_diagonal_element(2, 2, Complex64::new(0.5, 0.0)) * u.adjoint(),
        )
        .unwrap()
    };
    let a = mc_operator_expectation(&f, 2, 500, 42, 4).unwrap();
    let b = mc_operator_expectation(&f, 2, 500, 42, 4).unwrap();
    assert_eq!(a.mean.max_abs_diff(&b.mean), 0.0);
    assert_eq!(a.stderr_re, b.stderr_re);
}
