//! Parameterized component archetypes and the constraints they emit.
//!
//! All power variables are in kW and represent the mean flow over a step;
//! energies (storage state of charge) are in kWh. The step length `Δt`
//! only enters storage dynamics and, later, cost and emission sums.

use std::collections::BTreeMap;
use std::fmt;

use strata_milp::{ConstraintId, LinearExpression, MilpProblem, ModelError, Relation, VariableId};
use thiserror::Error;

use crate::carrier::Carrier;
use crate::horizon::Horizon;

/// Named time series, e.g. `pv_south` (normalized availability) or
/// `house_demand` (kW).
pub type Profiles = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Archetype {
    Generator,
    Storage,
    Converter,
    GridConnection,
    Demand,
}

impl Archetype {
    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Generator => "Generator",
            Archetype::Storage => "Storage",
            Archetype::Converter => "Converter",
            Archetype::GridConnection => "GridConnection",
            Archetype::Demand => "Demand",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Archetype::Generator,
            Archetype::Storage,
            Archetype::Converter,
            Archetype::GridConnection,
            Archetype::Demand,
        ]
        .into_iter()
        .find(|a| a.as_str().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Capacity is a decision variable (may come out as zero).
    Sizing,
    /// Capacity is a fixed input; only dispatch is optimized.
    Operation,
}

/// Side of a component a flow enters or leaves through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Port {
    /// Flow from a bus into the component (demand, converter input,
    /// storage charging, grid export).
    Input,
    /// Flow from the component into a bus (generation, converter output,
    /// storage discharging, grid import).
    Output,
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Port::Input => "input",
            Port::Output => "output",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSpec {
    pub name: String,
    pub archetype: Archetype,
    pub carrier_in: Option<Carrier>,
    pub carrier_out: Option<Carrier>,
    /// kW, or kWh for storage. `None` means the component is to be sized.
    pub capacity: Option<f64>,
    /// Upper bound on the size chosen in sizing mode.
    pub max_capacity: Option<f64>,
    /// Explicit mode; defaults to sizing when no capacity is given.
    pub mode: Option<Mode>,
    pub efficiency: f64,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    /// Output per unit input; falls back to `efficiency` when absent.
    pub conversion_ratio: Option<f64>,
    /// Storage power limit per unit of energy capacity, 1/h.
    pub c_rate: f64,
    /// Fixed storage power limit in kW, overrides `c_rate`.
    pub power_limit: Option<f64>,
    /// Forbid simultaneous charging and discharging with one binary per step.
    pub exclusive_charging: bool,
    /// Generators only: whether output may fall below availability.
    pub curtailable: bool,
    pub capex_per_unit: f64,
    pub opex_per_unit_energy: f64,
    pub co2_per_unit_energy: f64,
    pub lifetime_years: u32,
    pub profile: Option<String>,
    pub bidirectional: bool,
}

impl ComponentSpec {
    fn base(name: &str, archetype: Archetype) -> Self {
        Self {
            name: name.to_string(),
            archetype,
            carrier_in: None,
            carrier_out: None,
            capacity: None,
            max_capacity: None,
            mode: None,
            efficiency: 1.0,
            charge_efficiency: 1.0,
            discharge_efficiency: 1.0,
            conversion_ratio: None,
            c_rate: 1.0,
            power_limit: None,
            exclusive_charging: false,
            curtailable: true,
            capex_per_unit: 0.0,
            opex_per_unit_energy: 0.0,
            co2_per_unit_energy: 0.0,
            lifetime_years: 20,
            profile: None,
            bidirectional: false,
        }
    }

    pub fn generator(name: &str, carrier: Carrier) -> Self {
        Self {
            carrier_out: Some(carrier),
            ..Self::base(name, Archetype::Generator)
        }
    }

    pub fn demand(name: &str, carrier: Carrier, profile: &str) -> Self {
        Self {
            carrier_in: Some(carrier),
            profile: Some(profile.to_string()),
            ..Self::base(name, Archetype::Demand)
        }
    }

    pub fn storage(name: &str, carrier: Carrier) -> Self {
        Self {
            carrier_in: Some(carrier),
            carrier_out: Some(carrier),
            bidirectional: true,
            ..Self::base(name, Archetype::Storage)
        }
    }

    pub fn converter(name: &str, from: Carrier, to: Carrier, ratio: f64) -> Self {
        Self {
            carrier_in: Some(from),
            carrier_out: Some(to),
            conversion_ratio: Some(ratio),
            ..Self::base(name, Archetype::Converter)
        }
    }

    pub fn grid(name: &str, carrier: Carrier) -> Self {
        Self {
            carrier_in: Some(carrier),
            carrier_out: Some(carrier),
            ..Self::base(name, Archetype::GridConnection)
        }
    }

    pub fn with_capacity(mut self, capacity: f64) -> Self {
        self.capacity = Some(capacity);
        self
    }

    pub fn with_max_capacity(mut self, max: f64) -> Self {
        self.max_capacity = Some(max);
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = Some(mode);
        self
    }

    pub fn with_profile(mut self, profile: &str) -> Self {
        self.profile = Some(profile.to_string());
        self
    }

    pub fn with_capex(mut self, per_unit: f64, lifetime_years: u32) -> Self {
        self.capex_per_unit = per_unit;
        self.lifetime_years = lifetime_years;
        self
    }

    pub fn with_opex(mut self, per_kwh: f64) -> Self {
        self.opex_per_unit_energy = per_kwh;
        self
    }

    pub fn with_co2(mut self, kg_per_kwh: f64) -> Self {
        self.co2_per_unit_energy = kg_per_kwh;
        self
    }

    pub fn with_efficiencies(mut self, charge: f64, discharge: f64) -> Self {
        self.charge_efficiency = charge;
        self.discharge_efficiency = discharge;
        self
    }

    pub fn bidirectional(mut self, yes: bool) -> Self {
        self.bidirectional = yes;
        self
    }

    pub fn exclusive_charging(mut self, yes: bool) -> Self {
        self.exclusive_charging = yes;
        self
    }

    pub fn curtailable(mut self, yes: bool) -> Self {
        self.curtailable = yes;
        self
    }

    /// The single carrier of storage and grid connections.
    pub fn carrier(&self) -> Option<Carrier> {
        self.carrier_in.or(self.carrier_out)
    }

    pub fn ports(&self) -> Vec<Port> {
        match self.archetype {
            Archetype::Generator => vec![Port::Output],
            Archetype::Demand => vec![Port::Input],
            Archetype::Converter | Archetype::Storage => vec![Port::Input, Port::Output],
            Archetype::GridConnection if self.bidirectional => vec![Port::Input, Port::Output],
            Archetype::GridConnection => vec![Port::Output],
        }
    }

    pub fn port_carrier(&self, port: Port) -> Option<Carrier> {
        match (self.archetype, port) {
            (Archetype::Storage | Archetype::GridConnection, _) => self.carrier(),
            (_, Port::Input) => self.carrier_in,
            (_, Port::Output) => self.carrier_out,
        }
    }

    /// Quantity name of the flow through `port`, as used in variable names.
    pub fn port_quantity(&self, port: Port) -> &'static str {
        match (self.archetype, port) {
            (Archetype::Storage, Port::Input) => "p_ch",
            (Archetype::Storage, Port::Output) => "p_dis",
            (Archetype::GridConnection, Port::Input) => "export",
            (Archetype::GridConnection, Port::Output) => "import",
            (_, Port::Input) => "p_in",
            (_, Port::Output) => "p_out",
        }
    }

    pub fn has_capacity(&self) -> bool {
        self.archetype != Archetype::Demand
    }

    pub fn default_mode(&self) -> Mode {
        match (self.mode, self.capacity) {
            (Some(m), _) => m,
            (None, Some(_)) => Mode::Operation,
            (None, None) if matches!(self.archetype, Archetype::Demand | Archetype::GridConnection) => Mode::Operation,
            (None, None) => Mode::Sizing,
        }
    }

    pub fn effective_ratio(&self) -> f64 {
        self.conversion_ratio.unwrap_or(self.efficiency)
    }

    /// Violations of the archetype invariants, one message each.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !is_valid_identifier(&self.name) {
            out.push(format!(
                "name `{}` must start with a letter or `_` and contain only letters, digits, `_` and `.`",
                self.name
            ));
        }
        match self.archetype {
            Archetype::Generator => {
                if self.carrier_out.is_none() || self.carrier_in.is_some() {
                    out.push("a Generator has an output carrier only".into());
                }
            }
            Archetype::Demand => {
                if self.carrier_in.is_none() || self.carrier_out.is_some() {
                    out.push("a Demand has an input carrier only".into());
                }
            }
            Archetype::Converter => match (self.carrier_in, self.carrier_out) {
                (Some(a), Some(b)) if a != b => {}
                (Some(_), Some(_)) => out.push("a Converter must change carrier".into()),
                _ => out.push("a Converter needs input and output carriers".into()),
            },
            Archetype::Storage | Archetype::GridConnection => match (self.carrier_in, self.carrier_out) {
                (Some(a), Some(b)) if a != b => {
                    out.push(format!("a {} has exactly one carrier", self.archetype))
                }
                (None, None) => out.push(format!("a {} needs a carrier", self.archetype)),
                _ => {}
            },
        }
        if self.bidirectional && !matches!(self.archetype, Archetype::Storage | Archetype::GridConnection) {
            out.push("only Storage and GridConnection may be bidirectional".into());
        }
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.efficiency) {
            out.push(format!("efficiency {} outside (0, 1]", self.efficiency));
        }
        if !unit(self.charge_efficiency) || !unit(self.discharge_efficiency) {
            out.push("storage efficiencies must lie in (0, 1]".into());
        }
        if let Some(r) = self.conversion_ratio {
            if !(r > 0.0 && r.is_finite()) {
                out.push(format!("conversion_ratio {r} must be positive"));
            }
        }
        if let Some(c) = self.capacity {
            let infinite_ok = self.archetype == Archetype::GridConnection && c == f64::INFINITY;
            if !(c >= 0.0 && (c.is_finite() || infinite_ok)) {
                out.push(format!("capacity {c} must be non-negative"));
            }
        }
        if let Some(c) = self.max_capacity {
            if !(c >= 0.0) {
                out.push(format!("max_capacity {c} must be non-negative"));
            }
        }
        if !(self.c_rate > 0.0 && self.c_rate.is_finite()) {
            out.push(format!("c_rate {} must be positive", self.c_rate));
        }
        if let Some(p) = self.power_limit {
            if !(p >= 0.0 && p.is_finite()) {
                out.push(format!("power_limit {p} must be non-negative"));
            }
        }
        if !(self.capex_per_unit >= 0.0 && self.capex_per_unit.is_finite()) {
            out.push("capex_per_unit must be non-negative".into());
        }
        if !self.opex_per_unit_energy.is_finite() || !self.co2_per_unit_energy.is_finite() {
            out.push("opex and co2 factors must be finite".into());
        }
        if self.lifetime_years < 1 {
            out.push("lifetime_years must be at least 1".into());
        }
        out
    }
}

pub fn is_valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CapacityHandle {
    Fixed(f64),
    Sized(VariableId),
}

impl CapacityHandle {
    pub fn value(&self, values: &[f64]) -> f64 {
        match *self {
            CapacityHandle::Fixed(c) => c,
            CapacityHandle::Sized(v) => values[v.index()],
        }
    }

    /// `factor · capacity` as an expression (a constant when fixed).
    pub fn scaled(&self, factor: f64) -> LinearExpression {
        match *self {
            CapacityHandle::Fixed(c) => LinearExpression::constant(factor * c),
            CapacityHandle::Sized(v) => LinearExpression::term(v, factor),
        }
    }
}

/// Variables and constraints one component contributed to a problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentBlock {
    /// Qualified component path, e.g. `home/pv`.
    pub path: String,
    pub archetype: Archetype,
    pub mode: Mode,
    pub capacity: Option<CapacityHandle>,
    pub input: Option<Vec<VariableId>>,
    pub output: Option<Vec<VariableId>>,
    /// State of charge at period boundaries: `periods · (period_length + 1)`
    /// entries, see [`ComponentBlock::soc_at`].
    pub soc: Vec<VariableId>,
    pub binaries: Vec<VariableId>,
    pub constraints: Vec<ConstraintId>,
}

impl ComponentBlock {
    pub fn flow(&self, port: Port) -> Option<&[VariableId]> {
        match port {
            Port::Input => self.input.as_deref(),
            Port::Output => self.output.as_deref(),
        }
    }

    /// SOC variable at local step `tau` (0..=L) of period `period`.
    pub fn soc_at(&self, horizon: &Horizon, period: usize, tau: usize) -> VariableId {
        self.soc[period * (horizon.period_length() + 1) + tau]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComponentError {
    #[error("component `{component}`: operation mode requires a capacity")]
    MissingCapacity { component: String },
    #[error("component `{component}`: profile `{profile}` not found")]
    MissingProfile { component: String, profile: String },
    #[error("component `{component}`: a {archetype} needs a profile")]
    ProfileRequired { component: String, archetype: Archetype },
    #[error("profile `{profile}` has {found} values, horizon has {expected} steps")]
    HorizonMismatch {
        profile: String,
        expected: usize,
        found: usize,
    },
    #[error("component `{component}`: {reason}")]
    InvalidSpec { component: String, reason: String },
    #[error("component `{component}`: exclusive charging in sizing mode needs max_capacity or power_limit for big-M")]
    UnboundedBigM { component: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Resolves the profile referenced by `spec` and checks its length.
pub fn resolve_profile<'a>(
    spec: &ComponentSpec,
    horizon: &Horizon,
    profiles: &'a Profiles,
) -> Result<Option<&'a [f64]>, ComponentError> {
    let Some(name) = &spec.profile else {
        if spec.archetype == Archetype::Demand {
            return Err(ComponentError::ProfileRequired {
                component: spec.name.clone(),
                archetype: spec.archetype,
            });
        }
        return Ok(None);
    };
    let series = profiles.get(name).ok_or_else(|| ComponentError::MissingProfile {
        component: spec.name.clone(),
        profile: name.clone(),
    })?;
    if series.len() != horizon.steps() {
        return Err(ComponentError::HorizonMismatch {
            profile: name.clone(),
            expected: horizon.steps(),
            found: series.len(),
        });
    }
    let invalid = |reason: String| ComponentError::InvalidSpec {
        component: spec.name.clone(),
        reason,
    };
    match spec.archetype {
        Archetype::Generator => {
            if let Some(v) = series.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(invalid(format!("availability profile `{name}` has value {v} outside [0, 1]")));
            }
        }
        Archetype::Demand => {
            if let Some(v) = series.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(invalid(format!("demand profile `{name}` has invalid value {v}")));
            }
        }
        _ => {}
    }
    Ok(Some(series))
}

/// Adds the variables and constraints of `spec` to `problem`.
///
/// Variables are named `{prefix}/{name}/{quantity}/{t}`; `path` (the
/// component path recorded in the block) is `prefix` with its leading level
/// segment removed.
pub fn emit_component_constraints(
    spec: &ComponentSpec,
    horizon: &Horizon,
    mode: Mode,
    problem: &mut MilpProblem,
    prefix: &str,
    profiles: &Profiles,
) -> Result<ComponentBlock, ComponentError> {
    if let Some(reason) = spec.validate().into_iter().next() {
        return Err(ComponentError::InvalidSpec {
            component: spec.name.clone(),
            reason,
        });
    }
    let profile = resolve_profile(spec, horizon, profiles)?;
    let steps = horizon.steps();
    let base = format!("{prefix}/{}", spec.name);
    let path = base.split_once('/').map_or(base.as_str(), |(_, rest)| rest).to_string();
    let mut constraints = Vec::new();

    let capacity = if !spec.has_capacity() {
        None
    } else {
        Some(match mode {
            Mode::Operation => CapacityHandle::Fixed(match (spec.capacity, spec.archetype) {
                (Some(c), _) => c,
                // a grid connection without a stated limit is unlimited
                (None, Archetype::GridConnection) => f64::INFINITY,
                (None, _) => {
                    return Err(ComponentError::MissingCapacity {
                        component: spec.name.clone(),
                    })
                }
            }),
            Mode::Sizing => CapacityHandle::Sized(problem.add_continuous(
                &format!("{base}/cap"),
                0.0,
                spec.max_capacity.unwrap_or(f64::INFINITY),
            )?),
        })
    };

    // `flow[t] ≤ factor[t] · cap` as a bound (fixed capacity) or a row (sized)
    let add_flow = |problem: &mut MilpProblem,
                        quantity: &str,
                        factor: &dyn Fn(usize) -> f64,
                        cap: Option<CapacityHandle>,
                        equal: bool,
                        constraints: &mut Vec<ConstraintId>|
     -> Result<Vec<VariableId>, ComponentError> {
        let mut vars = Vec::with_capacity(steps);
        for t in 0..steps {
            let name = format!("{base}/{quantity}/{t}");
            let v = match cap {
                None => problem.add_continuous(&name, 0.0, f64::INFINITY)?,
                Some(CapacityHandle::Fixed(c)) => {
                    let ub = if factor(t) == 0.0 { 0.0 } else { factor(t) * c };
                    let lb = if equal { ub } else { 0.0 };
                    problem.add_continuous(&name, lb, ub)?
                }
                Some(CapacityHandle::Sized(cv)) => {
                    let v = problem.add_continuous(&name, 0.0, f64::INFINITY)?;
                    let rel = if equal { Relation::Equal } else { Relation::LessEqual };
                    constraints.push(problem.add_constraint(
                        &format!("{base}/{quantity}_limit/{t}"),
                        LinearExpression::term(v, 1.0).with_term(cv, -factor(t)),
                        rel,
                        0.0,
                    )?);
                    v
                }
            };
            vars.push(v);
        }
        Ok(vars)
    };

    let mut block = ComponentBlock {
        path,
        archetype: spec.archetype,
        mode,
        capacity,
        input: None,
        output: None,
        soc: Vec::new(),
        binaries: Vec::new(),
        constraints: Vec::new(),
    };

    match spec.archetype {
        Archetype::Generator => {
            let avail = |t: usize| profile.map_or(1.0, |p| p[t]);
            block.output = Some(add_flow(
                problem,
                "p_out",
                &avail,
                capacity,
                !spec.curtailable,
                &mut constraints,
            )?);
        }
        Archetype::Demand => {
            let demand = profile.expect("resolve_profile guarantees a demand profile");
            let mut vars = Vec::with_capacity(steps);
            for (t, &d) in demand.iter().enumerate() {
                vars.push(problem.add_continuous(&format!("{base}/p_in/{t}"), d, d)?);
            }
            block.input = Some(vars);
        }
        Archetype::Converter => {
            let ratio = spec.effective_ratio();
            let input = add_flow(problem, "p_in", &|_| 1.0, None, false, &mut constraints)?;
            let output = add_flow(problem, "p_out", &|_| 1.0, capacity, false, &mut constraints)?;
            for t in 0..steps {
                constraints.push(problem.add_constraint(
                    &format!("{base}/conversion/{t}"),
                    LinearExpression::term(output[t], 1.0).with_term(input[t], -ratio),
                    Relation::Equal,
                    0.0,
                )?);
            }
            block.input = Some(input);
            block.output = Some(output);
        }
        Archetype::GridConnection => {
            block.output = Some(add_flow(problem, "import", &|_| 1.0, capacity, false, &mut constraints)?);
            if spec.bidirectional {
                block.input = Some(add_flow(problem, "export", &|_| 1.0, capacity, false, &mut constraints)?);
            }
        }
        Archetype::Storage => {
            let cap = capacity.expect("storage has a capacity");
            let power = match (spec.power_limit, cap) {
                (Some(p), _) => CapacityHandle::Fixed(p),
                (None, CapacityHandle::Fixed(c)) => CapacityHandle::Fixed(c * spec.c_rate),
                (None, sized) => sized,
            };
            let power_factor = if spec.power_limit.is_none() { spec.c_rate } else { 1.0 };
            let (charge, discharge) = match power {
                CapacityHandle::Fixed(p) => (
                    add_flow(problem, "p_ch", &|_| 1.0, Some(CapacityHandle::Fixed(p)), false, &mut constraints)?,
                    add_flow(problem, "p_dis", &|_| 1.0, Some(CapacityHandle::Fixed(p)), false, &mut constraints)?,
                ),
                sized => (
                    add_flow(problem, "p_ch", &|_| power_factor, Some(sized), false, &mut constraints)?,
                    add_flow(problem, "p_dis", &|_| power_factor, Some(sized), false, &mut constraints)?,
                ),
            };

            let len = horizon.period_length();
            let soc_upper = match cap {
                CapacityHandle::Fixed(c) => c,
                CapacityHandle::Sized(_) => f64::INFINITY,
            };
            let mut soc = Vec::with_capacity(horizon.periods() * (len + 1));
            for p in 0..horizon.periods() {
                for tau in 0..=len {
                    let k = p * (len + 1) + tau;
                    let v = problem.add_continuous(&format!("{base}/soc/{k}"), 0.0, soc_upper)?;
                    if let CapacityHandle::Sized(cv) = cap {
                        constraints.push(problem.add_constraint(
                            &format!("{base}/soc_limit/{k}"),
                            LinearExpression::term(v, 1.0).with_term(cv, -1.0),
                            Relation::LessEqual,
                            0.0,
                        )?);
                    }
                    soc.push(v);
                }
            }
            let dt = horizon.dt_hours();
            for p in 0..horizon.periods() {
                for tau in 0..len {
                    let t = p * len + tau;
                    let k = p * (len + 1) + tau;
                    // soc[k+1] - soc[k] - ηc·Δt·ch + Δt/ηd·dis = 0
                    let e = LinearExpression::term(soc[k + 1], 1.0)
                        .with_term(soc[k], -1.0)
                        .with_term(charge[t], -spec.charge_efficiency * dt)
                        .with_term(discharge[t], dt / spec.discharge_efficiency);
                    constraints.push(problem.add_constraint(
                        &format!("{base}/dynamics/{t}"),
                        e,
                        Relation::Equal,
                        0.0,
                    )?);
                }
                let first = p * (len + 1);
                constraints.push(problem.add_constraint(
                    &format!("{base}/cyclic/{p}"),
                    LinearExpression::term(soc[first + len], 1.0).with_term(soc[first], -1.0),
                    Relation::Equal,
                    0.0,
                )?);
            }

            if spec.exclusive_charging {
                let big_m = match power {
                    CapacityHandle::Fixed(p) => p,
                    CapacityHandle::Sized(_) => match spec.max_capacity {
                        Some(max) => max * spec.c_rate,
                        None => {
                            return Err(ComponentError::UnboundedBigM {
                                component: spec.name.clone(),
                            })
                        }
                    },
                };
                for t in 0..steps {
                    let u = problem.add_binary(&format!("{base}/u/{t}"))?;
                    constraints.push(problem.add_constraint(
                        &format!("{base}/charge_mode/{t}"),
                        LinearExpression::term(charge[t], 1.0).with_term(u, -big_m),
                        Relation::LessEqual,
                        0.0,
                    )?);
                    constraints.push(problem.add_constraint(
                        &format!("{base}/discharge_mode/{t}"),
                        LinearExpression::term(discharge[t], 1.0).with_term(u, big_m),
                        Relation::LessEqual,
                        big_m,
                    )?);
                    block.binaries.push(u);
                }
            }
            block.input = Some(charge);
            block.output = Some(discharge);
            block.soc = soc;
        }
    }
    block.constraints = constraints;
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use strata_milp::{solve_lp, solve_milp, LpStatus, Sense};

    fn profiles(entries: &[(&str, &[f64])]) -> Profiles {
        entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
    }

    #[test]
    fn generator_bounds_follow_profile() {
        let mut p = MilpProblem::new();
        let spec = ComponentSpec::generator("pv", Carrier::Electricity)
            .with_capacity(5.0)
            .with_profile("sun");
        let h = Horizon::new(2, 1.0);
        let b = emit_component_constraints(&spec, &h, Mode::Operation, &mut p, "L1/home", &profiles(&[("sun", &[0.5, 1.0])]))
            .unwrap();
        let out = b.output.unwrap();
        assert_eq!(p.variable(out[0]).upper, 2.5);
        assert_eq!(p.variable(out[1]).upper, 5.0);
        assert_eq!(b.path, "home/pv");
        assert_eq!(p.variable(out[0]).name, "L1/home/pv/p_out/0");
    }

    #[test]
    fn converter_couples_input_and_output() {
        let mut p = MilpProblem::new();
        let spec = ComponentSpec::converter("hp", Carrier::Electricity, Carrier::Heat, 3.0).with_capacity(10.0);
        let h = Horizon::new(1, 1.0);
        let b = emit_component_constraints(&spec, &h, Mode::Operation, &mut p, "L1/x", &Profiles::new()).unwrap();
        let (pin, pout) = (b.input.unwrap()[0], b.output.unwrap()[0]);
        p.set_bounds(pin, 2.0, 2.0).unwrap();
        p.set_objective(pout.into(), Sense::Maximize).unwrap();
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.values.unwrap()[pout.index()], 6.0);
        // the output is forced: minimizing gives the same value
        p.set_objective(pout.into(), Sense::Minimize).unwrap();
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.values.unwrap()[pout.index()], 6.0);
    }

    #[test]
    fn lossless_storage_round_trip() {
        let mut p = MilpProblem::new();
        let spec = ComponentSpec::storage("bat", Carrier::Electricity).with_capacity(1.0);
        let h = Horizon::new(2, 1.0);
        let b = emit_component_constraints(&spec, &h, Mode::Operation, &mut p, "L1/x", &Profiles::new()).unwrap();
        assert_eq!(b.soc.len(), 3);
        let ch = b.input.clone().unwrap();
        let dis = b.output.clone().unwrap();
        let mut x = vec![0.0; p.num_variables()];
        x[ch[0].index()] = 1.0;
        x[dis[1].index()] = 1.0;
        for (k, v) in [0.0, 1.0, 0.0].iter().enumerate() {
            x[b.soc[k].index()] = *v;
        }
        assert!(p.max_violation(&x) < 1e-12);
        // and breaking the cycle is infeasible
        x[b.soc[2].index()] = 0.5;
        assert!(p.max_violation(&x) > 0.1);
    }

    #[test]
    fn operation_mode_requires_capacity() {
        let mut p = MilpProblem::new();
        let spec = ComponentSpec::generator("pv", Carrier::Electricity);
        let err = emit_component_constraints(&spec, &Horizon::new(1, 1.0), Mode::Operation, &mut p, "L1/a", &Profiles::new())
            .unwrap_err();
        assert_eq!(err, ComponentError::MissingCapacity { component: "pv".into() });
    }

    #[test]
    fn demand_profile_checks() {
        let h = Horizon::new(2, 1.0);
        let mut p = MilpProblem::new();
        let mut spec = ComponentSpec::demand("load", Carrier::Heat, "q");
        spec.profile = None;
        assert!(matches!(
            emit_component_constraints(&spec, &h, Mode::Operation, &mut p, "L1/a", &Profiles::new()),
            Err(ComponentError::ProfileRequired { .. })
        ));
        let spec = ComponentSpec::demand("load", Carrier::Heat, "q");
        assert!(matches!(
            emit_component_constraints(&spec, &h, Mode::Operation, &mut p, "L1/a", &Profiles::new()),
            Err(ComponentError::MissingProfile { .. })
        ));
        assert!(matches!(
            emit_component_constraints(&spec, &h, Mode::Operation, &mut p, "L1/a", &profiles(&[("q", &[1.0, 2.0, 3.0])])),
            Err(ComponentError::HorizonMismatch { expected: 2, found: 3, .. })
        ));
    }

    #[test]
    fn sized_storage_with_exclusive_binaries() {
        let mut p = MilpProblem::new();
        let spec = ComponentSpec::storage("bat", Carrier::Electricity)
            .with_max_capacity(4.0)
            .exclusive_charging(true);
        let h = Horizon::new(3, 1.0);
        let b = emit_component_constraints(&spec, &h, Mode::Sizing, &mut p, "L1/a", &Profiles::new()).unwrap();
        assert!(matches!(b.capacity, Some(CapacityHandle::Sized(_))));
        assert_eq!(b.binaries.len(), 3);
        let Some(CapacityHandle::Sized(cap)) = b.capacity else { unreachable!() };
        assert_eq!(p.variable(cap).lower, 0.0);
        // push charging and discharging at t=0: the binary forbids doing both
        let ch0 = b.input.as_ref().unwrap()[0];
        let dis0 = b.output.as_ref().unwrap()[0];
        p.set_objective(LinearExpression::term(ch0, 1.0).with_term(dis0, 1.0), Sense::Maximize)
            .unwrap();
        let s = solve_milp(&p, 1e-9, 10_000).unwrap();
        let v = s.values.unwrap();
        assert!(v[ch0.index()] * v[dis0.index()] <= 1e-9);

        let spec = ComponentSpec::storage("bat2", Carrier::Electricity).exclusive_charging(true);
        assert!(matches!(
            emit_component_constraints(&spec, &h, Mode::Sizing, &mut p, "L1/a", &Profiles::new()),
            Err(ComponentError::UnboundedBigM { .. })
        ));
    }

    #[test]
    fn spec_invariants() {
        let mut g = ComponentSpec::generator("pv", Carrier::Electricity);
        assert!(g.validate().is_empty());
        g.carrier_in = Some(Carrier::Heat);
        assert!(!g.validate().is_empty());
        let c = ComponentSpec::converter("x", Carrier::Heat, Carrier::Heat, 1.0);
        assert!(!c.validate().is_empty());
        let d = ComponentSpec::demand("d", Carrier::Heat, "p").bidirectional(true);
        assert!(!d.validate().is_empty());
        let s = ComponentSpec::storage("bad-name", Carrier::Heat);
        assert!(!s.validate().is_empty());
        let mut e = ComponentSpec::storage("s", Carrier::Heat);
        e.charge_efficiency = 1.2;
        assert!(!e.validate().is_empty());
        let gen_mode = ComponentSpec::generator("pv", Carrier::Electricity);
        assert_eq!(gen_mode.default_mode(), Mode::Sizing);
        assert_eq!(gen_mode.with_capacity(1.0).default_mode(), Mode::Operation);
        let _ = LpStatus::Optimal;
    }
}
