use proptest::prelude::*;
use strata_milp::*;
use strata_testkit::{
    exhaustive_integer, random_binary_milp, random_bounded_lp, vertex_enumeration, ChaCha8Rng, SeedableRng,
};

#[test]
fn lp_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    for k in 0..100 {
        let p = random_bounded_lp(&mut rng, 6, 6);
        let expected = vertex_enumeration(&p).expect("generator builds feasible LPs");
        let got = solve_lp(&p).unwrap();
        assert_eq!(got.status, LpStatus::Optimal, "instance {k}");
        let obj = got.objective.unwrap();
        assert!((obj - expected).abs() <= 1e-6, "instance {k}: {obj} vs {expected}");
        let values = got.values.unwrap();
        assert!(p.max_violation(&values) <= 1e-8, "instance {k}");
        for v in p.variables() {
            let x = values[v.id.index()];
            assert!(x >= v.lower - 1e-9 && x <= v.upper + 1e-9);
        }
    }
}

#[test]
fn milp_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut feasible = 0;
    for k in 0..50 {
        let p = random_binary_milp(&mut rng, 12, 6);
        let expected = exhaustive_integer(&p);
        let got = solve_milp(&p, 1e-9, 100_000).unwrap();
        match expected {
            None => assert_eq!(got.status, MilpStatus::Infeasible, "instance {k}"),
            Some((obj, _)) => {
                feasible += 1;
                assert_eq!(got.status, MilpStatus::Optimal, "instance {k}");
                let o = got.objective.unwrap();
                assert!((o - obj).abs() <= 1e-6, "instance {k}: {o} vs {obj}");
                let values = got.values.unwrap();
                assert!(values.iter().all(|x| (x - x.round()).abs() <= 1e-6));
                assert!(p.max_violation(&values) <= 1e-9);
                let bound = got.best_bound.unwrap();
                match p.sense() {
                    Sense::Minimize => assert!(bound <= o + 1e-8),
                    Sense::Maximize => assert!(bound >= o - 1e-8),
                }
            }
        }
    }
    assert!(feasible >= 25, "generator too restrictive: {feasible}");
}

#[test]
fn continuous_milp_equals_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let p = random_bounded_lp(&mut rng, 5, 5);
        let lp = solve_lp(&p).unwrap();
        let milp = solve_milp(&p, 1e-6, 10).unwrap();
        assert_eq!(milp.nodes_explored, 1);
        assert_eq!(milp.objective, lp.objective);
        assert_eq!(milp.values, lp.values);
    }
}

#[test]
fn solves_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let p = random_binary_milp(&mut rng, 10, 5);
        let a = solve_milp(&p, 1e-6, 100_000).unwrap();
        let b = solve_milp(&p, 1e-6, 100_000).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn export_is_byte_stable() {
    let build = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        random_binary_milp(&mut rng, 8, 4)
    };
    assert_eq!(write_lp(&build()), write_lp(&build()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_text_round_trip_preserves_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_bounded_lp(&mut rng, 5, 5);
        let text = write_lp(&p);
        let back = parse_lp(&text).unwrap();
        prop_assert_eq!(write_lp(&back), text);
        let a = solve_lp(&p).unwrap().objective.unwrap();
        let b = solve_lp(&back).unwrap().objective.unwrap();
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn binary_round_trip_preserves_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_binary_milp(&mut rng, 6, 3);
        let back = parse_lp(&write_lp(&p)).unwrap();
        let a = solve_milp(&p, 1e-9, 10_000).unwrap();
        let b = solve_milp(&back, 1e-9, 10_000).unwrap();
        prop_assert_eq!(a.status, b.status);
        prop_assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_lp(&text);
    }
}
