//! Objective functions over assembled models.

use std::collections::BTreeMap;

use strata_milp::{LinearExpression, Sense};

use crate::carrier::Carrier;
use crate::component::{Archetype, CapacityHandle, Port};
use crate::error::Error;
use crate::model::EnergyModel;

/// Capital recovery factor `i(1+i)^n / ((1+i)^n − 1)`, or `1/n` at `i = 0`.
pub fn annuity_factor(interest_rate: f64, lifetime_years: u32) -> f64 {
    assert!(lifetime_years >= 1, "lifetime must be at least one year");
    assert!(interest_rate >= 0.0, "interest rate must be non-negative");
    let n = lifetime_years as f64;
    if interest_rate == 0.0 {
        return 1.0 / n;
    }
    let q = (1.0 + interest_rate).powf(n);
    interest_rate * q / (q - 1.0)
}

/// A price or factor that is either constant or given per timestep.
#[derive(Clone, Debug, PartialEq)]
pub enum PriceSeries {
    Scalar(f64),
    Series(Vec<f64>),
}

impl PriceSeries {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            PriceSeries::Scalar(v) => *v,
            PriceSeries::Series(s) => s[t],
        }
    }

    fn check(&self, what: &str, steps: usize) -> Result<(), Error> {
        let bad = |v: f64| !(v.is_finite() && v >= 0.0);
        match self {
            PriceSeries::Scalar(v) if bad(*v) => Err(Error::InvalidInput(format!("{what}: price {v} must be non-negative"))),
            PriceSeries::Series(s) if s.len() != steps => Err(Error::InvalidInput(format!(
                "{what}: {} values for a horizon of {steps} steps",
                s.len()
            ))),
            PriceSeries::Series(s) => match s.iter().find(|v| bad(**v)) {
                Some(v) => Err(Error::InvalidInput(format!("{what}: price {v} must be non-negative"))),
                None => Ok(()),
            },
            PriceSeries::Scalar(_) => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CostParameters {
    /// Required by the annuity objective.
    pub interest_rate: Option<f64>,
    /// Price per kWh imported through boundary grids, per carrier.
    pub import_price: BTreeMap<Carrier, PriceSeries>,
    /// Remuneration per kWh exported; zero when absent.
    pub export_remuneration: BTreeMap<Carrier, PriceSeries>,
    /// Emission factor of imported energy, kg per kWh.
    pub co2_factor: BTreeMap<Carrier, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ObjectiveKind {
    Annuity,
    OperatingCost,
    Co2,
    SelfConsumption,
    Custom,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Annuity => "Annuity",
            ObjectiveKind::OperatingCost => "OperatingCost",
            ObjectiveKind::Co2 => "CO2",
            ObjectiveKind::SelfConsumption => "SelfConsumption",
            ObjectiveKind::Custom => "Custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ObjectiveKind::Annuity,
            ObjectiveKind::OperatingCost,
            ObjectiveKind::Co2,
            ObjectiveKind::SelfConsumption,
            ObjectiveKind::Custom,
        ]
        .into_iter()
        .find(|k| k.as_str().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Quantity name → weight, for [`ObjectiveKind::Custom`].
    pub custom_terms: BTreeMap<String, f64>,
    /// Sense of a custom objective (minimize by default).
    pub sense: Option<Sense>,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind) -> Self {
        Self {
            kind,
            custom_terms: BTreeMap::new(),
            sense: None,
        }
    }

    pub fn custom(terms: impl IntoIterator<Item = (String, f64)>, sense: Sense) -> Self {
        Self {
            kind: ObjectiveKind::Custom,
            custom_terms: terms.into_iter().collect(),
            sense: Some(sense),
        }
    }

    pub fn label(&self) -> &'static str {
        self.kind.as_str()
    }
}

/// Names accepted in custom objectives besides component quantities.
pub const BUILTIN_QUANTITIES: [&str; 4] = ["annuity", "operating_cost", "co2", "self_consumption"];

/// Builds the objective expression and its sense.
pub fn build_objective(spec: &ObjectiveSpec, model: &EnergyModel, cost: &CostParameters) -> Result<(LinearExpression, Sense), Error> {
    match spec.kind {
        ObjectiveKind::Annuity => Ok((annuity(model, cost)?, Sense::Minimize)),
        ObjectiveKind::OperatingCost => Ok((operating_cost(model, cost)?, Sense::Minimize)),
        ObjectiveKind::Co2 => Ok((co2(model, cost)?, Sense::Minimize)),
        ObjectiveKind::SelfConsumption => Ok((self_consumption(model), Sense::Maximize)),
        ObjectiveKind::Custom => {
            if spec.custom_terms.is_empty() {
                return Err(Error::InvalidInput("a custom objective needs at least one term".into()));
            }
            let mut e = LinearExpression::new();
            for (name, &w) in &spec.custom_terms {
                e.add_scaled(&quantity(model, cost, name)?, w);
            }
            Ok((e, spec.sense.unwrap_or(Sense::Minimize)))
        }
    }
}

/// Sets the model's objective and returns its sense.
pub fn apply_objective(model: &mut EnergyModel, spec: &ObjectiveSpec, cost: &CostParameters) -> Result<Sense, Error> {
    let (expr, sense) = build_objective(spec, model, cost)?;
    model.problem.set_objective(expr, sense)?;
    Ok(sense)
}

/// Expression of a named quantity: `{path}/{flow}` is the weighted energy of
/// a flow in kWh, `{path}/capacity` a capacity, and the built-in names
/// select whole objectives.
pub fn quantity(model: &EnergyModel, cost: &CostParameters, name: &str) -> Result<LinearExpression, Error> {
    match name {
        "annuity" => return annuity(model, cost),
        "operating_cost" => return operating_cost(model, cost),
        "co2" => return co2(model, cost),
        "self_consumption" => return Ok(self_consumption(model)),
        _ => {}
    }
    let h = &model.horizon;
    let energy = |vars: &[strata_milp::VariableId]| {
        let mut e = LinearExpression::new();
        for (t, v) in vars.iter().enumerate() {
            e.add_term(*v, h.step_hours(t));
        }
        e
    };
    for c in &model.components {
        if name == format!("{}/capacity", c.block.path) {
            if let Some(cap) = c.block.capacity {
                if !matches!(cap, CapacityHandle::Fixed(v) if !v.is_finite()) {
                    return Ok(cap.scaled(1.0));
                }
            }
        }
        for port in c.spec.ports() {
            if name == c.column(port) {
                return Ok(energy(c.flow(port).unwrap()));
            }
        }
    }
    for a in &model.auxiliary {
        if name == a.column {
            return Ok(energy(&a.vars));
        }
    }
    Err(Error::UnknownQuantity(name.to_string()))
}

fn check_price(price: &PriceSeries, what: String, model: &EnergyModel) -> Result<(), Error> {
    price.check(&what, model.horizon.steps())
}

/// Horizon cost in currency units: boundary imports at the import price,
/// exports at the remuneration, and opex on every component's output energy.
pub fn operating_cost(model: &EnergyModel, cost: &CostParameters) -> Result<LinearExpression, Error> {
    let h = &model.horizon;
    let mut e = LinearExpression::new();
    for c in &model.components {
        if c.boundary {
            let carrier = c.spec.carrier().expect("grid carrier");
            let price = cost
                .import_price
                .get(&carrier)
                .ok_or_else(|| Error::MissingCostParameter(format!("import_price for {carrier} (grid `{}`)", c.block.path)))?;
            check_price(price, format!("import_price for {carrier}"), model)?;
            if let Some(import) = c.flow(Port::Output) {
                for (t, v) in import.iter().enumerate() {
                    e.add_term(*v, price.at(t) * h.step_hours(t));
                }
            }
            if let (Some(export), Some(rem)) = (c.flow(Port::Input), cost.export_remuneration.get(&carrier)) {
                check_price(rem, format!("export_remuneration for {carrier}"), model)?;
                for (t, v) in export.iter().enumerate() {
                    e.add_term(*v, -rem.at(t) * h.step_hours(t));
                }
            }
        }
        if c.spec.opex_per_unit_energy != 0.0 {
            if let Some(out) = c.flow(Port::Output) {
                for (t, v) in out.iter().enumerate() {
                    e.add_term(*v, c.spec.opex_per_unit_energy * h.step_hours(t));
                }
            }
        }
    }
    Ok(e)
}

/// Capital recovery on every capacity plus the operating cost scaled to a year.
pub fn annuity(model: &EnergyModel, cost: &CostParameters) -> Result<LinearExpression, Error> {
    let i = cost
        .interest_rate
        .ok_or_else(|| Error::MissingCostParameter("interest_rate".into()))?;
    if !(i >= 0.0 && i.is_finite()) {
        return Err(Error::InvalidInput(format!("interest_rate {i} must be non-negative")));
    }
    let mut e = operating_cost(model, cost)?.scaled(model.horizon.annualization_factor());
    for c in &model.components {
        let Some(cap) = c.block.capacity else { continue };
        if c.spec.capex_per_unit == 0.0 {
            continue;
        }
        if matches!(cap, CapacityHandle::Fixed(v) if !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "component `{}` has capex but no capacity limit",
                c.block.path
            )));
        }
        let factor = annuity_factor(i, c.spec.lifetime_years) * c.spec.capex_per_unit;
        e.add_scaled(&cap.scaled(1.0), factor);
    }
    Ok(e)
}

/// Emissions in kg over the horizon: boundary imports at the carrier factor
/// plus each component's own factor on its output energy.
pub fn co2(model: &EnergyModel, cost: &CostParameters) -> Result<LinearExpression, Error> {
    let h = &model.horizon;
    let mut e = LinearExpression::new();
    for c in &model.components {
        let mut factor = c.spec.co2_per_unit_energy;
        if c.boundary {
            let carrier = c.spec.carrier().expect("grid carrier");
            factor += *cost
                .co2_factor
                .get(&carrier)
                .ok_or_else(|| Error::MissingCostParameter(format!("co2_factor for {carrier} (grid `{}`)", c.block.path)))?;
        }
        if factor != 0.0 {
            if let Some(out) = c.flow(Port::Output) {
                for (t, v) in out.iter().enumerate() {
                    e.add_term(*v, factor * h.step_hours(t));
                }
            }
        }
    }
    Ok(e)
}

/// Self-consumed generation in kWh: generator output minus boundary export.
/// Used instead of the self-consumption ratio, which is not linear.
pub fn self_consumption(model: &EnergyModel) -> LinearExpression {
    let h = &model.horizon;
    let mut e = LinearExpression::new();
    for c in &model.components {
        let (vars, sign) = match (c.spec.archetype, c.boundary) {
            (Archetype::Generator, _) => (c.flow(Port::Output), 1.0),
            (Archetype::GridConnection, true) => (c.flow(Port::Input), -1.0),
            _ => (None, 0.0),
        };
        if let Some(vars) = vars {
            for (t, v) in vars.iter().enumerate() {
                e.add_term(*v, sign * h.step_hours(t));
            }
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::component::{ComponentSpec, Mode, Profiles};
    use crate::horizon::Horizon;
    use crate::model::assemble_model;
    use crate::topology::ProsumerTopology;

    #[test]
    fn annuity_factor_cases() {
        assert_eq!(annuity_factor(0.0, 10), 0.1);
        assert!((annuity_factor(0.05, 1) - 1.05).abs() < 1e-12);
        assert!((annuity_factor(0.05, 20) - 0.080243).abs() < 1e-6);
    }

    fn grid_home(import: &[f64]) -> (EnergyModel, Vec<f64>) {
        let topo = ProsumerTopology::new("h")
            .with_bus("el", Carrier::Electricity)
            .with_component(ComponentSpec::grid("grid", Carrier::Electricity).bidirectional(true))
            .with_component(ComponentSpec::demand("load", Carrier::Electricity, "d"))
            .with_undirected_link("grid", "el")
            .with_link("el", "load");
        let profiles: Profiles = [("d".to_string(), import.to_vec())].into();
        let m = assemble_model(&topo, &Horizon::new(import.len(), 1.0), Mode::Operation, &profiles).unwrap();
        let mut x = vec![0.0; m.problem.num_variables()];
        let imp = m.components[0].flow(Port::Output).unwrap();
        for (t, v) in imp.iter().enumerate() {
            x[v.index()] = import[t];
        }
        (m, x)
    }

    #[test]
    fn operating_cost_is_a_dot_product() {
        let (m, x) = grid_home(&[0.0, 2.0]);
        let mut cost = CostParameters::default();
        assert!(matches!(operating_cost(&m, &cost), Err(Error::MissingCostParameter(_))));
        cost.import_price.insert(Carrier::Electricity, PriceSeries::Scalar(0.30));
        assert!((operating_cost(&m, &cost).unwrap().evaluate(&x) - 0.60).abs() < 1e-12);
    }

    #[test]
    fn co2_scales_imports() {
        let (m, x) = grid_home(&[2.0, 3.0]);
        let mut cost = CostParameters::default();
        cost.co2_factor.insert(Carrier::Electricity, 0.4);
        assert!((co2(&m, &cost).unwrap().evaluate(&x) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn annuity_requires_interest_rate() {
        let (m, _) = grid_home(&[1.0]);
        let cost = CostParameters {
            import_price: [(Carrier::Electricity, PriceSeries::Scalar(0.1))].into(),
            ..Default::default()
        };
        assert_eq!(
            annuity(&m, &cost).unwrap_err(),
            Error::MissingCostParameter("interest_rate".into())
        );
    }

    #[test]
    fn custom_quantities() {
        let (m, x) = grid_home(&[1.0, 2.0]);
        let cost = CostParameters::default();
        let spec = ObjectiveSpec::custom([("h/grid/import".to_string(), 2.0)], Sense::Minimize);
        let (e, _) = build_objective(&spec, &m, &cost).unwrap();
        assert_eq!(e.evaluate(&x), 6.0);
        let spec = ObjectiveSpec::custom([("h/nothing/import".to_string(), 1.0)], Sense::Minimize);
        assert_eq!(
            build_objective(&spec, &m, &cost).unwrap_err(),
            Error::UnknownQuantity("h/nothing/import".into())
        );
    }

    #[test]
    fn price_series_length_is_checked() {
        let (m, _) = grid_home(&[1.0, 2.0]);
        let cost = CostParameters {
            import_price: [(Carrier::Electricity, PriceSeries::Series(vec![0.1]))].into(),
            ..Default::default()
        };
        assert!(matches!(operating_cost(&m, &cost), Err(Error::InvalidInput(_))));
    }
}
