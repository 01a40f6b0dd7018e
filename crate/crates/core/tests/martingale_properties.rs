use proptest::prelude::*;
use transfer_core::martingale::{
    compile_to_circle, embedded_barycenter, lift, log_staircase, psi_truncated, random_point_tree,
    validate_membership, BoundaryCurve, MartingaleTree, MembershipDomain, Schedule,
};
use transfer_core::search::{exp_integral, SearchConfig, Target};
use transfer_core::IntervalQuery;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Compiling a lifted point martingale reproduces the root point through
    /// the curve embedding, and the root measure exactly.
    #[test]
    fn lift_compile_consistency(seed in any::<u64>(), which in 0usize..2, lh in 0.3f64..0.95) {
        let curve = [BoundaryCurve::Parabola, BoundaryCurve::PowerCurve { p: 2.5 }][which];
        let root = random_point_tree(&curve, 4, seed);
        let point = root.value;
        let lifted = lift(&MartingaleTree::Point { root }, &curve).unwrap();
        let m0 = lifted.measure_root().unwrap().value.clone();
        let e = compile_to_circle(&lifted, &Schedule::uniform(lh, Some(3))).unwrap();
        prop_assert!(e.distribution().tv_distance(&m0) < 1e-12);
        let (full, _) = e.query_distribution(&IntervalQuery::new(0.0, 1.0).unwrap()).unwrap();
        let b = embedded_barycenter(&full, &curve);
        prop_assert!((b[0] - point[0]).abs() < 1e-10 && (b[1] - point[1]).abs() < 1e-10 * point[1].abs().max(1.0));
    }

    /// Segment points between the tail measure and the cut-off delta are the
    /// distributions of the truncated staircase on [0, s].
    #[test]
    fn psi_realizes_segments(n in 1usize..8, t in 1.0f64..20.0) {
        let (lambda, big_n) = (1.3f64, 8);
        let (_, m) = log_staircase(lambda, big_n).unwrap();
        let mut node = m.measure_root().unwrap();
        for _ in 0..n - 1 {
            node = &node.children[1].node;
        }
        let cut = lambda.powi(-(n as i32));
        let s = cut * t;
        let seg = node.children[1].node.value.mix(&node.children[0].node.value, 1.0 - cut / s).unwrap();
        let psi = psi_truncated(lambda, big_n, n, s).unwrap().full_distribution();
        prop_assert!(psi.tv_distance(&seg) < 1e-12);
        prop_assert!((psi.central_moment(1.0) - seg.central_moment(1.0)).abs() < 1e-10);
    }
}

#[test]
fn staircase_validates_at_lemma_scale() {
    let delta = 0.3;
    let (_, m) = log_staircase((delta / 5.0f64).exp(), 50).unwrap();
    let eps = 2.0 / std::f64::consts::E + delta;
    let r = validate_membership(&m, &MembershipDomain::BmoP { p: 1.0, eps }, &SearchConfig::default()).unwrap();
    assert!(r.pass, "worst margin {}", r.worst_margin);
}

#[test]
fn staircase_compiled_pipeline() {
    let (f, m) = log_staircase(1.5, 5).unwrap();
    let e = compile_to_circle(&m, &Schedule::default()).unwrap();
    let m0 = &m.measure_root().unwrap().value;
    assert_eq!(e.distribution().tv_distance(m0), 0.0);
    for c in [-0.7, 0.3, 1.0] {
        let atoms = m0.expectation(|v| (c * v).exp());
        let circ = exp_integral(&Target::Expr(e.clone()), None, c).unwrap();
        let flat = exp_integral(&Target::Flat(f.clone()), None, c).unwrap();
        assert!((circ - atoms).abs() < 1e-12 * atoms);
        assert!((flat - atoms).abs() < 1e-12 * atoms);
    }
}

/// Validation passing with room to spare bounds every sampled interval of the
/// compiled circle function once the homogenization is fine enough.
#[test]
fn validation_soundness_on_grid() {
    let (_, m) = log_staircase(1.5, 5).unwrap();
    let (p, eps) = (1.0, 1.0);
    let r = validate_membership(&m, &MembershipDomain::BmoP { p, eps }, &SearchConfig::default()).unwrap();
    assert!(r.pass && r.worst_margin < -0.05);
    let e = compile_to_circle(&m, &Schedule::uniform(0.95, None)).unwrap();
    let n = 400;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for len in [1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0, 1.7, 3.2] {
            let left = i as f64 / n as f64;
            let (d, _) = e.query_distribution(&IntervalQuery::new(left, left + len).unwrap()).unwrap();
            worst = worst.max(d.central_moment(p));
        }
    }
    assert!(worst < eps.powf(p) + 1e-9, "sampled moment {worst}");
}

/// Staircase norms approach 2/e: the distance stays under an envelope in
/// the step ratio and the tail length that shrinks along the grid. The
/// distance itself is not monotone, since averaging over steps can push the
/// norm slightly above 2/e.
#[test]
fn staircase_convergence_trend() {
    let target = 2.0 / std::f64::consts::E;
    let mut envelopes = Vec::new();
    for (lambda, n) in [(1.3f64, 20usize), (1.15, 50), (1.08, 120), (1.04, 300), (1.02, 700)] {
        let (f, _) = log_staircase(lambda, n).unwrap();
        let v = transfer_core::search::bmo_norm(&f, 1.0, &SearchConfig::default()).unwrap().lower;
        let envelope = (lambda - 1.0) / 10.0 + (-(n as f64) * lambda.ln()).exp();
        assert!((v - target).abs() <= envelope, "lambda {lambda}: {v} vs envelope {envelope}");
        envelopes.push(envelope);
    }
    assert!(envelopes.windows(2).all(|w| w[1] < w[0]));
}
