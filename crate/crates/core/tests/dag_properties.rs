use proptest::prelude::*;
use rand::Rng;
use transfer_core::corpus;
use transfer_core::dag::ConstructExpr;
use transfer_core::{DistFunctional, IntervalQuery};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Lazy queries against the flattened function, on random sub-intervals.
    #[test]
    fn queries_match_materialized(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let e = corpus::construction(&mut rng, 3).unwrap();
        let Ok(flat) = e.materialize(100_000) else { return Ok(()) };
        let (a, b) = e.carrier();
        prop_assert!(flat.full_distribution().tv_distance(e.distribution()) < 1e-12);
        for _ in 0..10 {
            let q = corpus::subinterval(&mut rng, a, b);
            let (lazy, _) = e.query_distribution(&q).unwrap();
            let direct = flat.distribution(&q).unwrap();
            prop_assert!(lazy.tv_distance(&direct) < 1e-10, "tv {}", lazy.tv_distance(&direct));
            let m1 = e.query(&q, &DistFunctional::CentralMoment { p: 1.5 }).unwrap().value;
            prop_assert!((m1 - direct.central_moment(1.5)).abs() < 1e-9);
        }
    }

    /// Circle queries, long arcs included, against the flattened period.
    #[test]
    fn circle_arcs_match_materialized(seed in any::<u64>()) {
        let mut rng = corpus::rng(seed);
        let e = ConstructExpr::periodize(corpus::construction(&mut rng, 2).unwrap());
        let Ok(flat) = e.materialize(100_000) else { return Ok(()) };
        for _ in 0..10 {
            let left = rng.gen_range(-3.0..3.0);
            let len = rng.gen_range(1e-4..5.0);
            let q = IntervalQuery::new(left, left + len).unwrap();
            let (lazy, _) = e.query_distribution(&q).unwrap();
            let direct = flat.distribution(&q).unwrap();
            prop_assert!(lazy.tv_distance(&direct) < 1e-10, "tv {}", lazy.tv_distance(&direct));
        }
    }

    /// Node distributions are the gluing mixture or the child distribution.
    #[test]
    fn distribution_identities(seed in any::<u64>(), alpha in 0.01f64..0.99, lambda in 0.2f64..0.99) {
        let mut rng = corpus::rng(seed);
        let l = corpus::construction(&mut rng, 2).unwrap();
        let r = corpus::construction(&mut rng, 2).unwrap();
        let g = ConstructExpr::glue(l.clone(), r.clone(), alpha, lambda, Some(4)).unwrap();
        prop_assert!(g.distribution().tv_distance(&l.distribution().mix(r.distribution(), alpha).unwrap()) < 1e-12);
        let h = ConstructExpr::hom(l.clone(), lambda, Some(4)).unwrap();
        prop_assert!(h.distribution().tv_distance(l.distribution()) < 1e-12);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>()) {
        let e = corpus::construction(&mut corpus::rng(seed), 3).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        let back: ConstructExpr = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
        prop_assert!(back.distribution().tv_distance(e.distribution()) == 0.0);
    }
}
