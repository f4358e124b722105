//! The bottom-up pipeline: prosumers are optimized alone, districts
//! re-optimize the operation of their members with frozen sizes, and cities
//! balance district residual loads over transfer links.

use std::collections::{BTreeMap, BTreeSet};

use strata_milp::{LinearExpression, MilpOptions, Relation};

use crate::carrier::Carrier;
use crate::component::{Archetype, ComponentSpec, Mode, Port, Profiles};
use crate::error::Error;
use crate::horizon::Horizon;
use crate::model::{EnergyModel, ModeSelection, ModelBuilder, ModelSolution, SolveStats};
use crate::objective::{apply_objective, CostParameters, ObjectiveSpec};
use crate::topology::ProsumerTopology;

/// Objective, prices and solver options shared by one pipeline run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub objective: ObjectiveSpec,
    pub cost: CostParameters,
    pub options: MilpOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProsumerResult {
    pub name: String,
    /// Capacity of every component with a finite one, by component name.
    pub capacities: BTreeMap<String, f64>,
    /// Flow and SOC series keyed `{prosumer}/{component}/{quantity}`.
    pub dispatch: BTreeMap<String, Vec<f64>>,
    /// Grid import minus export per carrier, kW.
    pub residual_load: BTreeMap<Carrier, Vec<f64>>,
    pub objective: f64,
    pub stats: SolveStats,
}

/// Assembles a stand-alone prosumer model with its objective applied.
pub fn prosumer_model(
    topo: &ProsumerTopology,
    horizon: &Horizon,
    mode: Mode,
    profiles: &Profiles,
    settings: &RunSettings,
) -> Result<EnergyModel, Error> {
    let mut b = ModelBuilder::new(horizon.clone());
    b.add_prosumer("L1", &topo.name, topo, mode.into(), profiles, true)?;
    let mut model = b.finish()?;
    apply_objective(&mut model, &settings.objective, &settings.cost)?;
    Ok(model)
}

pub fn optimize_prosumer(
    topo: &ProsumerTopology,
    horizon: &Horizon,
    mode: Mode,
    profiles: &Profiles,
    settings: &RunSettings,
) -> Result<ProsumerResult, Error> {
    let model = prosumer_model(topo, horizon, mode, profiles, settings)?;
    let sol = model.solve(&settings.options, &format!("prosumer `{}`", topo.name))?;
    Ok(prosumer_result(&topo.name, &model, &sol))
}

fn prosumer_result(name: &str, model: &EnergyModel, sol: &ModelSolution) -> ProsumerResult {
    let prefix = format!("{name}/");
    let capacities = model
        .capacities(&sol.values)
        .into_iter()
        .map(|(path, v)| (path.strip_prefix(&prefix).unwrap_or(&path).to_string(), v))
        .collect();
    ProsumerResult {
        name: name.to_string(),
        capacities,
        dispatch: model.dispatch(&sol.values),
        residual_load: model.boundary_residual(&sol.values),
        objective: sol.objective,
        stats: sol.stats.clone(),
    }
}

/// Level-2 description of a district.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DistrictSpec {
    pub name: String,
    pub members: Vec<ProsumerTopology>,
    /// Central storage, generation or conversion, attached to the district
    /// bus of each port's carrier.
    pub central: Vec<ComponentSpec>,
    /// Priced connections of the district to the outside.
    pub shared_grids: Vec<ComponentSpec>,
    /// Upper limit on total shared-grid import per carrier, kW.
    pub peak_import_limit: BTreeMap<Carrier, f64>,
}

/// A district together with the level-1 results of its members.
#[derive(Clone, Debug, PartialEq)]
pub struct DistrictModel {
    pub spec: DistrictSpec,
    pub level1: Vec<ProsumerResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistrictResult {
    pub name: String,
    pub objective: f64,
    pub stats: SolveStats,
    /// Capacities of central components, by name.
    pub central_capacities: BTreeMap<String, f64>,
    /// All series keyed `{district}/{owner}/{component}/{quantity}`.
    pub dispatch: BTreeMap<String, Vec<f64>>,
    /// Member series minus their level-1 counterparts, keyed like level 1.
    pub dispatch_delta: BTreeMap<String, Vec<f64>>,
    /// Member grid exchange (import − export) per member and carrier.
    pub member_residual: BTreeMap<String, BTreeMap<Carrier, Vec<f64>>>,
    /// Shared-grid import − export per carrier.
    pub residual_load: BTreeMap<Carrier, Vec<f64>>,
}

fn district_bus(
    b: &mut ModelBuilder,
    buses: &mut BTreeMap<Carrier, usize>,
    level: &str,
    district: &str,
    carrier: Carrier,
) -> Result<usize, Error> {
    if let Some(&i) = buses.get(&carrier) {
        return Ok(i);
    }
    let i = b.add_bus(level, district, carrier.as_str(), carrier)?;
    buses.insert(carrier, i);
    Ok(i)
}

/// Places a district: members (frozen when `level1` is given), their grid
/// connections routed to per-carrier district buses, central components,
/// shared grids and coordinator rows.
fn add_district(
    b: &mut ModelBuilder,
    level: &str,
    spec: &DistrictSpec,
    level1: Option<&[ProsumerResult]>,
    profiles: &Profiles,
) -> Result<(), Error> {
    let mut buses: BTreeMap<Carrier, usize> = BTreeMap::new();
    for topo in &spec.members {
        let owner = format!("{}/{}", spec.name, topo.name);
        let placed = match level1 {
            Some(results) => {
                let frozen = freeze(topo, results)?;
                b.add_prosumer(level, &owner, &frozen, ModeSelection::Operation, profiles, false)?
            }
            None => b.add_prosumer(level, &owner, topo, ModeSelection::PerComponent, profiles, false)?,
        };
        for &c in &placed.components {
            let comp = b.component(c);
            if comp.spec.archetype != Archetype::GridConnection {
                continue;
            }
            let carrier = comp.spec.carrier().expect("grid carrier");
            let has_export = comp.flow(Port::Input).is_some();
            let bus = district_bus(b, &mut buses, level, &spec.name, carrier)?;
            // what the member imports leaves the district bus, and vice versa
            let import = b.component(c).flow(Port::Output).unwrap().to_vec();
            b.attach_flow(bus, import, -1.0);
            if has_export {
                let export = b.component(c).flow(Port::Input).unwrap().to_vec();
                b.attach_flow(bus, export, 1.0);
            }
        }
    }

    let mut central = Vec::new();
    for (specs, boundary) in [(&spec.central, false), (&spec.shared_grids, true)] {
        for c in specs.iter() {
            if boundary && c.archetype != Archetype::GridConnection {
                return Err(Error::InvalidInput(format!(
                    "district `{}`: shared grid `{}` is a {}",
                    spec.name, c.name, c.archetype
                )));
            }
            let idx = b.add_component(level, &spec.name, c, c.default_mode(), profiles, boundary)?;
            for port in c.ports() {
                let carrier = c.port_carrier(port).expect("validated carrier");
                let bus = district_bus(b, &mut buses, level, &spec.name, carrier)?;
                b.attach_port(bus, idx, port);
            }
            central.push(idx);
        }
    }

    for (&carrier, &limit) in &spec.peak_import_limit {
        let imports: Vec<_> = central
            .iter()
            .filter(|&&i| {
                let c = b.component(i);
                c.boundary && c.spec.carrier() == Some(carrier)
            })
            .map(|&i| b.component(i).flow(Port::Output).unwrap().to_vec())
            .collect();
        if imports.is_empty() {
            return Err(Error::InvalidInput(format!(
                "district `{}`: peak limit on {carrier} without a shared {carrier} grid",
                spec.name
            )));
        }
        for t in 0..b.horizon().steps() {
            let mut e = LinearExpression::new();
            for series in &imports {
                e.add_term(series[t], 1.0);
            }
            b.problem_mut().add_constraint(
                &format!("{level}/{}/coordinator/peak_{carrier}/{t}", spec.name),
                e,
                Relation::LessEqual,
                limit,
            )?;
        }
    }
    Ok(())
}

/// Copy of `topo` with every capacity taken from its level-1 result.
fn freeze(topo: &ProsumerTopology, results: &[ProsumerResult]) -> Result<ProsumerTopology, Error> {
    let missing = |component: &str| Error::FrozenCapacityMissing {
        prosumer: topo.name.clone(),
        component: component.to_string(),
    };
    let result = results
        .iter()
        .find(|r| r.name == topo.name)
        .ok_or_else(|| missing("*"))?;
    let mut frozen = topo.clone();
    for c in &mut frozen.components {
        if !c.has_capacity() {
            continue;
        }
        match result.capacities.get(&c.name) {
            Some(&v) => c.capacity = Some(v),
            // unlimited grid connections have no finite capacity to freeze
            None if c.archetype == Archetype::GridConnection && c.capacity.is_none() => {}
            None => return Err(missing(&c.name)),
        }
        c.mode = Some(Mode::Operation);
    }
    Ok(frozen)
}

/// Assembles the level-2 model with its objective applied.
pub fn district_model(
    district: &DistrictModel,
    horizon: &Horizon,
    profiles: &Profiles,
    settings: &RunSettings,
) -> Result<EnergyModel, Error> {
    let mut b = ModelBuilder::new(horizon.clone());
    add_district(&mut b, "L2", &district.spec, Some(&district.level1), profiles)?;
    let mut model = b.finish()?;
    apply_objective(&mut model, &settings.objective, &settings.cost)?;
    Ok(model)
}

pub fn optimize_district(
    district: &DistrictModel,
    horizon: &Horizon,
    profiles: &Profiles,
    settings: &RunSettings,
) -> Result<DistrictResult, Error> {
    let spec = &district.spec;
    let model = district_model(district, horizon, profiles, settings)?;
    let sol = model.solve(&settings.options, &format!("district `{}`", spec.name))?;
    let values = &sol.values;
    let dispatch = model.dispatch(values);

    let prefix = format!("{}/", spec.name);
    let mut dispatch_delta = BTreeMap::new();
    for r in &district.level1 {
        for (column, l1) in &r.dispatch {
            if let Some(l2) = dispatch.get(&format!("{prefix}{column}")) {
                let delta = l2.iter().zip(l1).map(|(a, b)| a - b).collect();
                dispatch_delta.insert(column.clone(), delta);
            }
        }
    }

    let steps = horizon.steps();
    let mut member_residual: BTreeMap<String, BTreeMap<Carrier, Vec<f64>>> = BTreeMap::new();
    for c in &model.components {
        if c.spec.archetype != Archetype::GridConnection || c.boundary {
            continue;
        }
        let member = c.owner.strip_prefix(&prefix).unwrap_or(&c.owner).to_string();
        let carrier = c.spec.carrier().unwrap();
        let acc = member_residual
            .entry(member)
            .or_default()
            .entry(carrier)
            .or_insert_with(|| vec![0.0; steps]);
        for (port, sign) in [(Port::Output, 1.0), (Port::Input, -1.0)] {
            if let Some(vars) = c.flow(port) {
                for (a, v) in acc.iter_mut().zip(vars) {
                    *a += sign * values[v.index()];
                }
            }
        }
    }

    let central_capacities = model
        .components
        .iter()
        .filter(|c| c.owner == spec.name)
        .filter_map(|c| {
            let v = c.block.capacity?.value(values);
            v.is_finite().then(|| (c.spec.name.clone(), v))
        })
        .collect();

    Ok(DistrictResult {
        name: spec.name.clone(),
        objective: sol.objective,
        stats: sol.stats,
        central_capacities,
        dispatch,
        dispatch_delta,
        member_residual,
        residual_load: model.boundary_residual(values),
    })
}

/// A district as seen from the city: a residual load per carrier and an
/// optional symmetric flexibility band around it.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CityDistrict {
    pub name: String,
    pub residual: BTreeMap<Carrier, Vec<f64>>,
    /// Maximum per-step deviation in kW; deviations must net to zero energy
    /// over the horizon. Zero (the default) fixes the residual.
    pub flexibility: BTreeMap<Carrier, f64>,
}

impl CityDistrict {
    pub fn from_result(result: &DistrictResult) -> Self {
        Self {
            name: result.name.clone(),
            residual: result.residual_load.clone(),
            flexibility: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferLink {
    pub from: String,
    pub to: String,
    pub carrier: Carrier,
    /// kW; directed from `from` to `to`.
    pub capacity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentralPlant {
    /// District whose node the plant feeds.
    pub node: String,
    pub spec: ComponentSpec,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CityModel {
    pub districts: Vec<CityDistrict>,
    pub links: Vec<TransferLink>,
    pub plants: Vec<CentralPlant>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CityResult {
    pub objective: f64,
    pub stats: SolveStats,
    pub dispatch: BTreeMap<String, Vec<f64>>,
    /// Net external exchange (import − export) per carrier over all districts.
    pub external_exchange: BTreeMap<Carrier, Vec<f64>>,
    pub plant_capacities: BTreeMap<String, f64>,
}

/// Assembles the level-3 transport model with its objective applied.
///
/// Every district node has an unlimited, priced slack connection named
/// `slack_{carrier}`, so the city balance is always feasible.
pub fn city_model(city: &CityModel, horizon: &Horizon, profiles: &Profiles, settings: &RunSettings) -> Result<EnergyModel, Error> {
    let steps = horizon.steps();
    let names: BTreeSet<&str> = city.districts.iter().map(|d| d.name.as_str()).collect();
    if names.len() != city.districts.len() {
        return Err(Error::InvalidInput("city districts must have unique names".into()));
    }
    for l in &city.links {
        for end in [&l.from, &l.to] {
            if !names.contains(end.as_str()) {
                return Err(Error::InvalidInput(format!("transfer link references unknown district `{end}`")));
            }
        }
        if !(l.capacity >= 0.0) {
            return Err(Error::InvalidInput(format!("transfer link {} → {}: negative capacity", l.from, l.to)));
        }
    }
    for p in &city.plants {
        if !names.contains(p.node.as_str()) {
            return Err(Error::InvalidInput(format!("plant `{}` placed at unknown district `{}`", p.spec.name, p.node)));
        }
    }

    let mut b = ModelBuilder::new(horizon.clone());
    let mut nodes: BTreeMap<(String, Carrier), usize> = BTreeMap::new();
    let mut carriers_at: BTreeMap<&str, BTreeSet<Carrier>> = BTreeMap::new();
    for d in &city.districts {
        carriers_at.entry(&d.name).or_default().extend(d.residual.keys().copied());
    }
    for l in &city.links {
        carriers_at.entry(&l.from).or_default().insert(l.carrier);
        carriers_at.entry(&l.to).or_default().insert(l.carrier);
    }
    for p in &city.plants {
        for port in p.spec.ports() {
            if let Some(c) = p.spec.port_carrier(port) {
                carriers_at.entry(&p.node).or_default().insert(c);
            }
        }
    }

    for d in &city.districts {
        for &carrier in &carriers_at[d.name.as_str()] {
            let bus = b.add_bus("L3", &d.name, carrier.as_str(), carrier)?;
            nodes.insert((d.name.clone(), carrier), bus);
            if let Some(r) = d.residual.get(&carrier) {
                if r.len() != steps {
                    return Err(Error::InvalidInput(format!(
                        "district `{}`: residual load has {} values for {steps} steps",
                        d.name,
                        r.len()
                    )));
                }
                let withdrawal: Vec<f64> = r.iter().map(|v| -v).collect();
                b.add_injection(bus, &withdrawal);
            }
            let slack = ComponentSpec::grid(&format!("slack_{carrier}"), carrier).bidirectional(true);
            let idx = b.add_component("L3", &d.name, &slack, Mode::Operation, profiles, true)?;
            b.attach_port(bus, idx, Port::Output);
            b.attach_port(bus, idx, Port::Input);

            let band = d.flexibility.get(&carrier).copied().unwrap_or(0.0);
            if band > 0.0 {
                let mut vars = Vec::with_capacity(steps);
                let mut neutral = LinearExpression::new();
                for t in 0..steps {
                    let v = b
                        .problem_mut()
                        .add_continuous(&format!("L3/{}/flex_{carrier}/adjust/{t}", d.name), -band, band)?;
                    neutral.add_term(v, horizon.weight(t));
                    vars.push(v);
                }
                b.problem_mut().add_constraint(
                    &format!("L3/{}/flex_{carrier}/neutral", d.name),
                    neutral,
                    Relation::Equal,
                    0.0,
                )?;
                b.attach_flow(bus, vars.clone(), -1.0);
                b.add_auxiliary(&format!("{}/flex_{carrier}/adjust", d.name), vars);
            }
        }
    }

    for l in &city.links {
        let name = format!("{}_to_{}_{}", l.from, l.to, l.carrier);
        let mut vars = Vec::with_capacity(steps);
        for t in 0..steps {
            vars.push(
                b.problem_mut()
                    .add_continuous(&format!("L3/city/{name}/flow/{t}"), 0.0, l.capacity)?,
            );
        }
        b.attach_flow(nodes[&(l.from.clone(), l.carrier)], vars.clone(), -1.0);
        b.attach_flow(nodes[&(l.to.clone(), l.carrier)], vars.clone(), 1.0);
        b.add_auxiliary(&format!("city/{name}/flow"), vars);
    }

    for p in &city.plants {
        let idx = b.add_component("L3", &p.node, &p.spec, p.spec.default_mode(), profiles, false)?;
        for port in p.spec.ports() {
            let carrier = p.spec.port_carrier(port).expect("validated carrier");
            b.attach_port(nodes[&(p.node.clone(), carrier)], idx, port);
        }
    }

    let mut model = b.finish()?;
    apply_objective(&mut model, &settings.objective, &settings.cost)?;
    Ok(model)
}

pub fn optimize_city(city: &CityModel, horizon: &Horizon, profiles: &Profiles, settings: &RunSettings) -> Result<CityResult, Error> {
    let model = city_model(city, horizon, profiles, settings)?;
    let sol = model.solve(&settings.options, "city")?;
    let plant_nodes: BTreeSet<(&str, &str)> = city
        .plants
        .iter()
        .map(|p| (p.node.as_str(), p.spec.name.as_str()))
        .collect();
    let plant_capacities = model
        .components
        .iter()
        .filter(|c| plant_nodes.contains(&(c.owner.as_str(), c.spec.name.as_str())))
        .filter_map(|c| {
            let v = c.block.capacity?.value(&sol.values);
            v.is_finite().then(|| (c.block.path.clone(), v))
        })
        .collect();
    Ok(CityResult {
        objective: sol.objective,
        stats: sol.stats.clone(),
        dispatch: model.dispatch(&sol.values),
        external_exchange: model.boundary_residual(&sol.values),
        plant_capacities,
    })
}

/// The undecomposed problem a hierarchical run approximates.
#[derive(Clone, Copy, Debug)]
pub enum MonolithicInput<'a> {
    Prosumer(&'a ProsumerTopology),
    District(&'a DistrictSpec),
}

/// Solves every level jointly: all capacities and all dispatch in one
/// problem, with the same objective as the hierarchical run.
pub fn monolithic_reference(
    input: MonolithicInput<'_>,
    horizon: &Horizon,
    profiles: &Profiles,
    settings: &RunSettings,
) -> Result<ModelSolution, Error> {
    monolithic_model(input, horizon, profiles, settings)?.solve(&settings.options, "monolithic reference")
}

/// Model behind [`monolithic_reference`], for inspection and export.
pub fn monolithic_model(
    input: MonolithicInput<'_>,
    horizon: &Horizon,
    profiles: &Profiles,
    settings: &RunSettings,
) -> Result<EnergyModel, Error> {
    let mut b = ModelBuilder::new(horizon.clone());
    match input {
        MonolithicInput::Prosumer(topo) => {
            b.add_prosumer("L1", &topo.name, topo, ModeSelection::PerComponent, profiles, true)?;
        }
        MonolithicInput::District(spec) => {
            add_district(&mut b, "L2", spec, None, profiles)?;
        }
    }
    let mut model = b.finish()?;
    apply_objective(&mut model, &settings.objective, &settings.cost)?;
    Ok(model)
}
