#![allow(dead_code)]

use strata::hierarchy::RunSettings;
use strata::objective::ObjectiveKind;
use strata::{Carrier, ComponentSpec, CostParameters, EnergyModel, MilpOptions, ObjectiveSpec, PriceSeries, Profiles, ProsumerTopology};

pub fn profiles(entries: &[(&str, &[f64])]) -> Profiles {
    entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

/// Electricity prosumer: optional forced PV, optional battery, a grid
/// connection and one demand, all on bus `el`.
pub fn home(name: &str, pv: Option<(f64, &str)>, battery: Option<f64>, demand: &str) -> ProsumerTopology {
    let mut t = ProsumerTopology::new(name).with_bus("el", Carrier::Electricity);
    if let Some((cap, profile)) = pv {
        t = t
            .with_component(
                ComponentSpec::generator("pv", Carrier::Electricity)
                    .with_capacity(cap)
                    .with_profile(profile)
                    .curtailable(false),
            )
            .with_link("pv", "el");
    }
    if let Some(cap) = battery {
        t = t
            .with_component(ComponentSpec::storage("bat", Carrier::Electricity).with_capacity(cap))
            .with_undirected_link("bat", "el");
    }
    t.with_component(ComponentSpec::grid("grid", Carrier::Electricity).bidirectional(true))
        .with_component(ComponentSpec::demand("load", Carrier::Electricity, demand))
        .with_undirected_link("grid", "el")
        .with_link("el", "load")
}

pub fn prices(import: f64, export: f64) -> CostParameters {
    CostParameters {
        interest_rate: Some(0.05),
        import_price: [(Carrier::Electricity, PriceSeries::Scalar(import))].into(),
        export_remuneration: [(Carrier::Electricity, PriceSeries::Scalar(export))].into(),
        co2_factor: [(Carrier::Electricity, 0.4)].into(),
    }
}

pub fn settings(kind: ObjectiveKind, cost: CostParameters) -> RunSettings {
    RunSettings {
        objective: ObjectiveSpec::new(kind),
        cost,
        options: MilpOptions::default(),
    }
}

/// Balance and storage residuals every optimal solution must honor.
pub fn assert_physics(model: &EnergyModel, values: &[f64]) {
    let balance = model.max_balance_residual(values);
    let storage = model.max_storage_residual(values);
    assert!(balance <= 1e-6, "balance residual {balance}");
    assert!(storage <= 1e-6, "storage residual {storage}");
    assert!(model.problem.max_violation(values) <= 1e-6);
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn assert_series(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
    for (g, w) in got.iter().zip(want) {
        assert!(close(*g, *w, tol), "{got:?} vs {want:?}");
    }
}
