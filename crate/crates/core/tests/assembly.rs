mod common;

use common::*;
use proptest::prelude::*;
use strata::hierarchy::prosumer_model;
use strata::objective::ObjectiveKind;
use strata::{assemble_model, Carrier, ComponentSpec, Error, Horizon, Mode, ObjectiveSpec};
use strata_milp::{write_lp, MilpOptions, Sense};

#[test]
fn balance_forces_import_and_export() {
    let topo = home("home", Some((2.0, "sun")), None, "load");
    let p = profiles(&[("sun", &[1.0, 0.0]), ("load", &[1.0, 2.0])]);
    let s = settings(ObjectiveKind::OperatingCost, prices(0.3, 0.1));
    let m = prosumer_model(&topo, &Horizon::new(2, 1.0), Mode::Operation, &p, &s).unwrap();
    let balances = m.problem.constraints().iter().filter(|c| c.name.contains("/balance/")).count();
    assert_eq!(balances, m.buses.len() * 2);
    let sol = m.solve(&MilpOptions::default(), "home").unwrap();
    assert_physics(&m, &sol.values);
    let d = m.dispatch(&sol.values);
    assert_series(&d["home/grid/export"], &[1.0, 0.0], 1e-9);
    assert_series(&d["home/grid/import"], &[0.0, 2.0], 1e-9);
}

/// Smallest total import over every battery schedule on a 0.1 kW grid.
fn brute_force_min_import(pv: [f64; 2], load: [f64; 2], capacity: f64) -> (f64, [f64; 2]) {
    let steps: Vec<f64> = strata_testkit::grid(0.0, capacity, 0.1);
    let mut best = (f64::INFINITY, [0.0; 2]);
    for &soc0 in &steps {
        for &ch0 in &steps {
            for &dis0 in &steps {
                for &ch1 in &steps {
                    for &dis1 in &steps {
                        let soc1 = soc0 + ch0 - dis0;
                        let soc2 = soc1 + ch1 - dis1;
                        let ok = |s: f64| (-1e-9..=capacity + 1e-9).contains(&s);
                        if !ok(soc1) || !ok(soc2) || (soc2 - soc0).abs() > 1e-9 {
                            continue;
                        }
                        let imp = [
                            (load[0] - pv[0] - dis0 + ch0).max(0.0),
                            (load[1] - pv[1] - dis1 + ch1).max(0.0),
                        ];
                        if imp[0] + imp[1] < best.0 - 1e-9 {
                            best = (imp[0] + imp[1], imp);
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn battery_shifts_surplus_to_cover_later_demand() {
    let topo = home("home", Some((2.0, "sun")), Some(1.0), "load");
    let p = profiles(&[("sun", &[1.0, 0.0]), ("load", &[1.0, 2.0])]);
    let mut s = settings(ObjectiveKind::Custom, prices(0.3, 0.1));
    s.objective = ObjectiveSpec::custom([("home/grid/import".to_string(), 1.0)], Sense::Minimize);
    let m = prosumer_model(&topo, &Horizon::new(2, 1.0), Mode::Operation, &p, &s).unwrap();
    let sol = m.solve(&MilpOptions::default(), "home").unwrap();
    assert_physics(&m, &sol.values);

    let (total, import) = brute_force_min_import([2.0, 0.0], [1.0, 2.0], 1.0);
    assert!(close(sol.objective, total, 1e-9));
    let d = m.dispatch(&sol.values);
    assert_series(&d["home/grid/import"], &import, 1e-9);
    assert_series(&d["home/grid/import"], &[0.0, 1.0], 1e-9);
    assert_series(&d["home/bat/p_dis"], &[0.0, 1.0], 1e-9);
}

#[test]
fn short_profile_is_a_horizon_mismatch() {
    let topo = home("home", None, None, "load");
    let p = profiles(&[("load", &[1.0, 2.0, 3.0])]);
    let err = assemble_model(&topo, &Horizon::new(2, 1.0), Mode::Operation, &p).unwrap_err();
    assert!(err.to_string().contains("3 values"), "{err}");
}

#[test]
fn missing_profile_is_reported() {
    let topo = home("home", None, None, "load");
    let err = assemble_model(&topo, &Horizon::new(2, 1.0), Mode::Operation, &profiles(&[])).unwrap_err();
    assert!(matches!(err, Error::Component { .. }));
    assert!(err.to_string().contains("`load`"), "{err}");
}

#[test]
fn invalid_topology_is_rejected_with_names() {
    let topo = home("home", None, None, "load")
        .with_bus("heat", Carrier::Heat)
        .with_component(ComponentSpec::demand("radiator", Carrier::Heat, "load"))
        .with_link("heat", "radiator");
    let err = assemble_model(&topo, &Horizon::new(1, 1.0), Mode::Operation, &profiles(&[("load", &[1.0])])).unwrap_err();
    assert!(err.to_string().contains("radiator"), "{err}");
}

#[test]
fn assembly_is_deterministic() {
    let topo = home("home", Some((2.0, "sun")), Some(1.0), "load");
    let p = profiles(&[("sun", &[1.0, 0.3, 0.0]), ("load", &[1.0, 2.0, 0.5])]);
    let s = settings(ObjectiveKind::Annuity, prices(0.3, 0.1));
    let a = prosumer_model(&topo, &Horizon::new(3, 1.0), Mode::Operation, &p, &s).unwrap();
    let b = prosumer_model(&topo, &Horizon::new(3, 1.0), Mode::Operation, &p, &s).unwrap();
    assert_eq!(write_lp(&a.problem), write_lp(&b.problem));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unused_component_leaves_objective_unchanged(
        sun in prop::collection::vec(0.0f64..=1.0, 4),
        load in prop::collection::vec(0.0f64..3.0, 4),
        bat in 0.0f64..4.0,
    ) {
        let p = profiles(&[("sun", &sun), ("load", &load)]);
        let s = settings(ObjectiveKind::OperatingCost, prices(0.3, 0.05));
        let h = Horizon::new(4, 1.0);
        let base = home("h", Some((2.0, "sun")), Some(bat), "load");
        let extra = base
            .clone()
            .with_component(ComponentSpec::generator("idle", Carrier::Electricity).with_capacity(0.0).with_opex(1.0))
            .with_link("idle", "el");
        let m1 = prosumer_model(&base, &h, Mode::Operation, &p, &s).unwrap();
        let m2 = prosumer_model(&extra, &h, Mode::Operation, &p, &s).unwrap();
        let s1 = m1.solve(&MilpOptions::default(), "a").unwrap();
        let s2 = m2.solve(&MilpOptions::default(), "b").unwrap();
        assert_physics(&m1, &s1.values);
        assert_physics(&m2, &s2.values);
        prop_assert!(close(s1.objective, s2.objective, 1e-9), "{} vs {}", s1.objective, s2.objective);
    }
}
