mod common;

use std::sync::Arc;

use common::*;
use isym_core::geometry::{
    candidate_field_gap, consistency_limit_check, consistency_map_symplectic_residual, curve_derivative_check,
    hamiltonian_operator_residual, interleave_residual, rho_combination, scheme_to_decomposition,
    tangent_identity_residual, AffineMap, ComposedMap, KickMap, LinearMap,
};
use isym_core::linalg::{is_symplectic, symplectic_residual};
use isym_core::systems::Harmonic;
use isym_core::{ConsistencyDecomposition, ConsistencyRule, CurveParameterization, Error, LocalMap, PhasePoint, SquareMatrix2n};
use proptest::prelude::*;
use rand::Rng;

const WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn linear(m: SquareMatrix2n) -> Arc<dyn LocalMap> {
    Arc::new(LinearMap(m))
}

fn spread(dec: &ConsistencyDecomposition, z_k: &PhasePoint, z_next: &PhasePoint) -> f64 {
    let values: Vec<PhasePoint> = WEIGHTS
        .iter()
        .map(|&a| rho_combination(&dec.with_weight(a).unwrap(), z_k, z_next).unwrap())
        .collect();
    values.iter().map(|v| (v - &values[0]).norm_inf()).fold(0.0, f64::max)
}

/// Nonlinear decomposition: ψ₁ = kick∘M₁, ψ₂ = kick'∘M₂.
fn kick_decomposition(r: &mut impl Rng) -> ConsistencyDecomposition {
    let m1 = &SquareMatrix2n::identity(1) + &random_matrix(r, 1, 0.2);
    let m2 = &SquareMatrix2n::identity(1) + &random_matrix(r, 1, 0.2);
    let psi1 = ComposedMap { outer: Arc::new(KickMap { n: 1, strength: r.gen_range(-0.3..0.3) }), inner: linear(m1) };
    let psi2 = ComposedMap { outer: Arc::new(KickMap { n: 1, strength: r.gen_range(-0.3..0.3) }), inner: linear(m2) };
    ConsistencyDecomposition::new(Arc::new(psi1), Arc::new(psi2), 0.5, "kick").unwrap()
}

fn bridge_rules(r: &mut impl Rng) -> Vec<ConsistencyRule> {
    let mut rules: Vec<ConsistencyRule> = [0.1, 0.25, 0.3, 0.5, 0.75, 0.9]
        .iter()
        .flat_map(|&a| (1..=3).map(move |n| ConsistencyRule::alpha(n, a).unwrap()))
        .collect();
    for k in 0..20 {
        let norm = r.gen_range(0.0..0.9);
        rules.push(ConsistencyRule::bmatrix(random_hamiltonian(r, 1 + k % 3, norm)));
    }
    rules
}

#[test]
fn weight_independence_at_common_point() {
    let sys = Harmonic::new(vec![1.0, 0.4]).unwrap();
    let z_k = pt(&[1.0, -0.5, 0.2, 0.8]);
    for h in [0.01, 0.1, 0.7] {
        let dec = isym_core::ConsistencyDecomposition::harmonic_flow(&sys, h);
        let z_next = sys.flow_matrix(h).mul_vec(&z_k);
        assert!(spread(&dec, &z_k, &z_next) <= 1e-12);
        let half = sys.flow_matrix(0.5 * h).mul_vec(&z_k);
        let rho = rho_combination(&dec, &z_k, &z_next).unwrap();
        assert!((&rho - &half).norm_inf() <= 1e-13);
    }

    let mut r = rng(5);
    for rule in bridge_rules(&mut r) {
        let dec = scheme_to_decomposition(&rule).unwrap();
        let z_k = random_point(&mut r, rule.dim_n(), 2.0);
        let z_next = dec.consistent_partner(&z_k).unwrap();
        assert!(spread(&dec, &z_k, &z_next) <= 1e-12 * (1.0 + z_next.norm_inf()), "{}", rule.label());
    }
    let dec = kick_decomposition(&mut r);
    let z_k = pt(&[0.4, -0.2]);
    assert!(spread(&dec, &z_k, &dec.consistent_partner(&z_k).unwrap()) <= 1e-12);
}

#[test]
fn tangent_identity_holds() {
    let mut r = rng(9);
    let sys = Harmonic::unit(2);
    let mut cases: Vec<(ConsistencyDecomposition, PhasePoint, PhasePoint)> = Vec::new();
    let z = pt(&[0.3, 1.0, -0.4, 0.2]);
    cases.push((ConsistencyDecomposition::harmonic_flow(&sys, 0.2), z.clone(), sys.flow_matrix(0.2).mul_vec(&z)));
    for rule in bridge_rules(&mut r) {
        let dec = scheme_to_decomposition(&rule).unwrap();
        let z_k = random_point(&mut r, rule.dim_n(), 1.0);
        let z_next = dec.consistent_partner(&z_k).unwrap();
        cases.push((dec, z_k, z_next));
    }
    for _ in 0..5 {
        let dec = kick_decomposition(&mut r);
        let z_k = random_point(&mut r, 1, 1.0);
        let z_next = dec.consistent_partner(&z_k).unwrap();
        cases.push((dec, z_k, z_next));
    }
    for (dec, z_k, z_next) in &cases {
        for a in WEIGHTS {
            let dec = dec.with_weight(a).unwrap();
            for _ in 0..50 {
                let v = random_point(&mut r, dec.dim_n(), 5.0);
                let res = tangent_identity_residual(&dec, z_k, z_next, &v).unwrap();
                assert!(res.relative() <= 1e-12, "{}: {:e}", dec.label(), res.relative());
            }
        }
        assert!(dec.tangent_fd_check(z_k, z_next).unwrap() <= 1e-7);
    }
}

#[test]
fn flow_pair_interleaves() {
    let sys = Harmonic::new(vec![1.3]).unwrap();
    let z = pt(&[0.5, -0.1]);
    let dec = ConsistencyDecomposition::harmonic_flow(&sys, 0.4);
    let (inv, fwd) = interleave_residual(&dec, &z, &sys.flow_matrix(0.4).mul_vec(&z)).unwrap();
    assert!(inv.relative() <= 1e-12 && fwd.relative() <= 1e-12);
}

#[test]
fn common_non_symplectic_factor_interleaves() {
    let mut r = rng(21);
    for k in 0..30 {
        let n = 1 + k % 3;
        let f = if k == 0 { SquareMatrix2n::scalar(n, 2.0) } else { &SquareMatrix2n::scalar(n, 1.5) + &random_matrix(&mut r, n, 0.4) };
        let g = random_symplectic(&mut r, n);
        let h = random_symplectic(&mut r, n);
        let dec = ConsistencyDecomposition::new(linear(&f * &g), linear(&f * &h), 0.5, "factored").unwrap();
        let z_k = random_point(&mut r, n, 1.0);
        let z_next = dec.consistent_partner(&z_k).unwrap();
        let (inv, _) = interleave_residual(&dec, &z_k, &z_next).unwrap();
        assert!(inv.relative() <= 1e-10, "sample {k}: {:e}", inv.relative());
        assert!(!is_symplectic(&dec.psi1().tangent(&z_k).unwrap(), 1e-3));
        assert!(!is_symplectic(&dec.psi2().tangent(&z_next).unwrap(), 1e-3));
        assert!(consistency_map_symplectic_residual(&dec, &z_k, &z_next).unwrap().relative() <= 1e-8);
    }
}

#[test]
fn stretch_pair_does_not_interleave() {
    let dec = ConsistencyDecomposition::new(
        linear(SquareMatrix2n::from_diagonal(&[2.0, 1.0]).unwrap()),
        linear(SquareMatrix2n::identity(1)),
        0.5,
        "stretch",
    )
    .unwrap();
    let z = pt(&[1.0, 1.0]);
    let (inv, _) = interleave_residual(&dec, &z, &z).unwrap();
    assert!(inv.relative() > 0.1);
    assert!(consistency_map_symplectic_residual(&dec, &z, &z).unwrap().relative() > 0.1);
}

#[test]
fn bridge_hamiltonian_operator_and_tangent_sum() {
    let mut r = rng(33);
    for rule in bridge_rules(&mut r) {
        let dec = scheme_to_decomposition(&rule).unwrap();
        let z = random_point(&mut r, rule.dim_n(), 1.0);
        assert!(hamiltonian_operator_residual(&dec, &z, &z).unwrap().relative() <= 1e-12);
        let a = dec.weight_a();
        let t1 = dec.psi1().tangent(&z).unwrap();
        let t2 = dec.psi2().tangent(&z).unwrap();
        let sum = &t1.scale(a) + &t2.scale(1.0 - a);
        assert_eq!(sum, SquareMatrix2n::identity(rule.dim_n()), "{}", rule.label());
    }
    for alpha in [0.0, 1.0] {
        let err = scheme_to_decomposition(&ConsistencyRule::alpha(1, alpha).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SingularMatrix { .. }));
    }
}

#[test]
fn limit_check_flow_family() {
    let sys = Harmonic::unit(1);
    let z = pt(&[0.6, 0.8]);
    let family = |z_k: &PhasePoint, z_next: &PhasePoint| Ok(ConsistencyDecomposition::harmonic_flow(&sys, (z_next - z_k).norm2()));
    let dev = consistency_limit_check(&family, &z, &[0.1, 0.01, 0.001]).unwrap();
    for (d, bound) in dev.iter().zip([0.06, 0.006, 0.0006]) {
        assert!(*d <= bound && *d > 0.0, "{dev:?}");
    }
    assert!(dev.windows(2).all(|w| w[1] < w[0]));

    let offset = ConsistencyDecomposition::new(
        Arc::new(AffineMap { matrix: SquareMatrix2n::identity(1), offset: pt(&[0.1, 0.0]) }),
        linear(SquareMatrix2n::identity(1)),
        0.5,
        "translation",
    )
    .unwrap();
    let dev = consistency_limit_check(&offset, &z, &[0.1, 0.01, 0.001]).unwrap();
    assert!(dev.iter().all(|d| (*d - 0.1).abs() <= 1e-15));
}

#[test]
fn trig_curve_on_flow_pair() {
    let sys = Harmonic::unit(1);
    let z = pt(&[1.0, 0.0]);
    let dec = ConsistencyDecomposition::harmonic_flow(&sys, 0.3);
    let z_next = sys.flow_matrix(0.3).mul_vec(&z);
    let res = curve_derivative_check(&dec, &z, &z_next, &pt(&[1.0, 2.0]), &pt(&[-0.5, 0.3]), CurveParameterization::Trig).unwrap();
    assert!(res.relative() <= 1e-6);
}

#[test]
fn candidate_field_vanishes_for_linear_bridges() {
    let sys = Harmonic::new(vec![0.8, 1.7]).unwrap();
    let dec = scheme_to_decomposition(&ConsistencyRule::midpoint(2)).unwrap();
    let gap = candidate_field_gap(&dec, &sys, &pt(&[0.1, 0.2, 0.3, 0.4]), &pt(&[-1.0, 0.5, 0.0, 2.0])).unwrap();
    assert!(gap <= 1e-15);
}

proptest! {
    #[test]
    fn linear_curve_derivative_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dec = kick_decomposition(&mut r);
        let z_k = random_point(&mut r, 1, 1.0);
        let z_next = random_point(&mut r, 1, 1.0);
        let (v1, v2) = (random_point(&mut r, 1, 2.0), random_point(&mut r, 1, 2.0));
        let lin = curve_derivative_check(&dec, &z_k, &z_next, &v1, &v2, CurveParameterization::Linear).unwrap();
        prop_assert!(lin.relative() <= 1e-10);
        let trig = curve_derivative_check(&dec, &z_k, &z_next, &v1, &v2, CurveParameterization::Trig).unwrap();
        prop_assert!(trig.relative() <= 1e-6);
    }

    #[test]
    fn interleave_implies_symplectic_consistency_map(seed in any::<u64>()) {
        let mut r = rng(seed);
        // symplectic kicks around a shared linear factor
        let f = &SquareMatrix2n::scalar(1, 1.2) + &random_matrix(&mut r, 1, 0.3);
        let psi = |s: f64| -> Arc<dyn LocalMap> {
            Arc::new(ComposedMap { outer: linear(f.clone()), inner: Arc::new(KickMap { n: 1, strength: s }) })
        };
        let dec = ConsistencyDecomposition::new(psi(r.gen_range(-0.5..0.5)), psi(r.gen_range(-0.5..0.5)), 0.5, "kicks").unwrap();
        let z_k = random_point(&mut r, 1, 1.5);
        let z_next = dec.consistent_partner(&z_k).unwrap();
        let (inv, _) = interleave_residual(&dec, &z_k, &z_next).unwrap();
        if inv.relative() <= 1e-10 {
            let t = dec.consistency_map_tangent(&z_k, &z_next).unwrap();
            prop_assert!(symplectic_residual(&t).relative() <= 1e-8);
        }
    }
}
