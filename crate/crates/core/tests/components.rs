mod common;

use common::*;
use proptest::prelude::*;
use strata::component::CapacityHandle;
use strata::hierarchy::{optimize_prosumer, prosumer_model};
use strata::objective::{annuity_factor, ObjectiveKind};
use strata::{Carrier, ComponentSpec, Horizon, Mode, Port, ProsumerTopology};
use strata_milp::MilpOptions;

const PROFILE: [f64; 4] = [0.0, 0.5, 1.0, 0.5];
const DEMAND: [f64; 4] = [1.0, 1.0, 1.0, 1.0];

fn two_technologies(capex_a: f64, capex_b: f64) -> ProsumerTopology {
    ProsumerTopology::new("toy")
        .with_bus("el", Carrier::Electricity)
        .with_component(
            ComponentSpec::generator("pv_a", Carrier::Electricity)
                .with_profile("sun")
                .with_capex(capex_a, 20),
        )
        .with_component(
            ComponentSpec::generator("pv_b", Carrier::Electricity)
                .with_profile("sun")
                .with_capex(capex_b, 20),
        )
        .with_component(ComponentSpec::grid("grid", Carrier::Electricity))
        .with_component(ComponentSpec::demand("load", Carrier::Electricity, "load"))
        .with_link("pv_a", "el")
        .with_link("pv_b", "el")
        .with_link("grid", "el")
        .with_link("el", "load")
}

/// Annual cost of a candidate pair of capacities: surplus is curtailed,
/// shortfall imported.
fn candidate_cost(a: f64, b: f64, capex_a: f64, capex_b: f64) -> f64 {
    let crf = annuity_factor(0.05, 20);
    let import: f64 = PROFILE
        .iter()
        .zip(DEMAND)
        .map(|(p, d)| (d - (a + b) * p).max(0.0))
        .sum();
    crf * (capex_a * a + capex_b * b) + 8760.0 / 4.0 * 0.3 * import
}

#[test]
fn dominated_technology_is_sized_to_zero() {
    let (capex_a, capex_b) = (100.0, 300.0);
    let topo = two_technologies(capex_a, capex_b);
    let p = profiles(&[("sun", &PROFILE), ("load", &DEMAND)]);
    let s = settings(ObjectiveKind::Annuity, prices(0.3, 0.0));
    let r = optimize_prosumer(&topo, &Horizon::new(4, 1.0), Mode::Sizing, &p, &s).unwrap();

    let grid: Vec<f64> = strata_testkit::grid(0.0, 3.0, 0.1);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &a in &grid {
        for &b in &grid {
            let c = candidate_cost(a, b, capex_a, capex_b);
            if c < best.0 - 1e-12 {
                best = (c, a, b);
            }
        }
    }
    assert_eq!(best.2, 0.0, "oracle picks the dominated technology");
    assert!(r.capacities["pv_b"].abs() <= 1e-9, "{:?}", r.capacities);
    assert!(close(r.objective, best.0, 1e-6), "{} vs {}", r.objective, best.0);
    assert!(close(r.capacities["pv_a"], best.1, 1e-6));
}

#[test]
fn expensive_technology_is_not_built_at_all() {
    // even the cheaper option is not worth building
    let topo = two_technologies(1e6, 2e6);
    let p = profiles(&[("sun", &PROFILE), ("load", &DEMAND)]);
    let s = settings(ObjectiveKind::Annuity, prices(0.3, 0.0));
    let r = optimize_prosumer(&topo, &Horizon::new(4, 1.0), Mode::Sizing, &p, &s).unwrap();
    assert_eq!(r.capacities["pv_a"], 0.0);
    assert_eq!(r.capacities["pv_b"], 0.0);
    assert_series(&r.residual_load[&Carrier::Electricity], &DEMAND, 1e-9);
}

fn storage_home(capacity: Option<f64>) -> ProsumerTopology {
    let mut bat = ComponentSpec::storage("bat", Carrier::Electricity)
        .with_efficiencies(0.9, 0.95)
        .with_capex(50.0, 10);
    bat.capacity = capacity;
    ProsumerTopology::new("h")
        .with_bus("el", Carrier::Electricity)
        .with_component(
            ComponentSpec::generator("pv", Carrier::Electricity)
                .with_capacity(3.0)
                .with_profile("sun"),
        )
        .with_component(bat)
        .with_component(ComponentSpec::grid("grid", Carrier::Electricity).bidirectional(true))
        .with_component(ComponentSpec::demand("load", Carrier::Electricity, "load"))
        .with_link("pv", "el")
        .with_undirected_link("bat", "el")
        .with_undirected_link("grid", "el")
        .with_link("el", "load")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operation_equals_sizing_with_fixed_capacity(
        cap in 0.0f64..6.0,
        sun in prop::collection::vec(0.0f64..=1.0, 6),
        load in prop::collection::vec(0.0f64..3.0, 6),
        import in 0.1f64..0.5,
    ) {
        let p = profiles(&[("sun", &sun), ("load", &load)]);
        let h = Horizon::new(6, 1.0);
        let s = settings(ObjectiveKind::Annuity, prices(import, 0.05));

        let op = prosumer_model(&storage_home(Some(cap)), &h, Mode::Operation, &p, &s).unwrap();
        let op_sol = op.solve(&MilpOptions::default(), "op").unwrap();
        assert_physics(&op, &op_sol.values);

        let mut sized = prosumer_model(&storage_home(None), &h, Mode::Sizing, &p, &s).unwrap();
        let Some(CapacityHandle::Sized(v)) = sized.components[1].block.capacity else { panic!("sized") };
        sized.problem.set_bounds(v, cap, cap).unwrap();
        let sized_sol = sized.solve(&MilpOptions::default(), "sized").unwrap();
        assert_physics(&sized, &sized_sol.values);

        prop_assert!(close(op_sol.objective, sized_sol.objective, 1e-6 * (1.0 + op_sol.objective.abs())),
            "{} vs {}", op_sol.objective, sized_sol.objective);
    }

    #[test]
    fn exclusive_storage_never_charges_and_discharges_at_once(
        sun in prop::collection::vec(0.0f64..=1.0, 5),
        load in prop::collection::vec(0.0f64..2.0, 5),
    ) {
        // forced PV with a small export limit: burning surplus through
        // simultaneous charge and discharge would help, binaries forbid it
        let topo = ProsumerTopology::new("h")
            .with_bus("el", Carrier::Electricity)
            .with_component(ComponentSpec::generator("pv", Carrier::Electricity).with_capacity(4.0).with_profile("sun").curtailable(false))
            .with_component(ComponentSpec::storage("bat", Carrier::Electricity).with_capacity(20.0).with_efficiencies(0.8, 0.8).exclusive_charging(true))
            .with_component(ComponentSpec::grid("grid", Carrier::Electricity).bidirectional(true).with_capacity(1.5))
            .with_component(ComponentSpec::demand("load", Carrier::Electricity, "load"))
            .with_link("pv", "el")
            .with_undirected_link("bat", "el")
            .with_undirected_link("grid", "el")
            .with_link("el", "load");
        let p = profiles(&[("sun", &sun), ("load", &load)]);
        let s = settings(ObjectiveKind::OperatingCost, prices(0.3, 0.0));
        let m = prosumer_model(&topo, &Horizon::new(5, 1.0), Mode::Operation, &p, &s).unwrap();
        if let Ok(sol) = m.solve(&MilpOptions::default(), "h") {
            assert_physics(&m, &sol.values);
            let bat = &m.components[1];
            let ch = bat.flow(Port::Input).unwrap();
            let dis = bat.flow(Port::Output).unwrap();
            for t in 0..5 {
                prop_assert!(sol.values[ch[t].index()] * sol.values[dis[t].index()] <= 1e-9);
            }
        }
    }
}

#[test]
fn soc_trajectory_is_exposed_per_step() {
    let sun = [0.0, 1.0, 1.0, 0.0];
    let load = [1.0, 0.0, 0.0, 1.0];
    let p = profiles(&[("sun", &sun), ("load", &load)]);
    let s = settings(ObjectiveKind::OperatingCost, prices(0.3, 0.0));
    let m = prosumer_model(&storage_home(Some(2.0)), &Horizon::new(4, 1.0), Mode::Operation, &p, &s).unwrap();
    let sol = m.solve(&MilpOptions::default(), "h").unwrap();
    assert_physics(&m, &sol.values);
    assert_eq!(m.components[1].block.soc.len(), 5);
    assert_eq!(m.dispatch(&sol.values)["h/bat/soc"].len(), 4);
}
