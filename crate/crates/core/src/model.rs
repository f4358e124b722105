//! Assembled energy-system models: placed components, bus balances and the
//! underlying MILP, plus the result extraction shared by every level.

use std::collections::BTreeMap;

use strata_milp::{
    solve_milp_with, LinearExpression, MilpOptions, MilpProblem, MilpStatus, Relation, VariableId,
};

use crate::carrier::Carrier;
use crate::component::{
    emit_component_constraints, Archetype, CapacityHandle, ComponentBlock, ComponentSpec, Mode, Port, Profiles,
};
use crate::error::Error;
use crate::horizon::Horizon;
use crate::topology::{resolve_wiring, ProsumerTopology};

/// A component emitted into a model.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedComponent {
    /// Owner path without level, e.g. `home` or `d1/home`.
    pub owner: String,
    pub spec: ComponentSpec,
    pub block: ComponentBlock,
    /// Whether this grid connection crosses the model boundary (and is
    /// therefore priced); always false for other archetypes.
    pub boundary: bool,
}

impl PlacedComponent {
    pub fn flow(&self, port: Port) -> Option<&[VariableId]> {
        self.block.flow(port)
    }

    /// Column name of the flow through `port`, e.g. `home/pv/p_out`.
    pub fn column(&self, port: Port) -> String {
        format!("{}/{}", self.block.path, self.spec.port_quantity(port))
    }
}

/// Signed flow series contributing to a bus balance (+ into the bus).
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceTerm {
    pub vars: Vec<VariableId>,
    pub sign: f64,
}

/// One balance `Σ inflow − Σ outflow + injection = 0` per timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct BusBalance {
    /// Qualified name, e.g. `L1/home/el`.
    pub name: String,
    pub carrier: Carrier,
    pub terms: Vec<BalanceTerm>,
    /// Exogenous net injection in kW (negative for fixed withdrawals).
    pub injection: Vec<f64>,
}

/// A free-standing flow variable series that is not part of a component,
/// such as an inter-district transfer.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryFlow {
    pub column: String,
    pub vars: Vec<VariableId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyModel {
    pub problem: MilpProblem,
    pub horizon: Horizon,
    pub components: Vec<PlacedComponent>,
    pub buses: Vec<BusBalance>,
    pub auxiliary: Vec<AuxiliaryFlow>,
}

/// Incrementally builds an [`EnergyModel`]; balances are emitted by
/// [`ModelBuilder::finish`] once every flow is attached.
pub struct ModelBuilder {
    model: EnergyModel,
    bus_index: BTreeMap<String, usize>,
}

/// Where the components of one prosumer ended up in a model.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacedProsumer {
    pub name: String,
    /// Model component indices, in topology order.
    pub components: Vec<usize>,
    /// Model bus indices, in wiring order.
    pub buses: Vec<usize>,
}

/// How component modes are chosen when a prosumer is assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeSelection {
    /// Each component's own mode (sizing unless a capacity is given).
    PerComponent,
    /// Everything in operation mode, capacities as given.
    Operation,
}

impl From<Mode> for ModeSelection {
    fn from(mode: Mode) -> Self {
        match mode {
            Mode::Sizing => ModeSelection::PerComponent,
            Mode::Operation => ModeSelection::Operation,
        }
    }
}

impl ModelBuilder {
    pub fn new(horizon: Horizon) -> Self {
        Self {
            model: EnergyModel {
                problem: MilpProblem::new(),
                horizon,
                components: Vec::new(),
                buses: Vec::new(),
                auxiliary: Vec::new(),
            },
            bus_index: BTreeMap::new(),
        }
    }

    pub fn horizon(&self) -> &Horizon {
        &self.model.horizon
    }

    pub fn problem_mut(&mut self) -> &mut MilpProblem {
        &mut self.model.problem
    }

    pub fn component(&self, index: usize) -> &PlacedComponent {
        &self.model.components[index]
    }

    /// Emits one component under `{level}/{owner}` and returns its index.
    pub fn add_component(
        &mut self,
        level: &str,
        owner: &str,
        spec: &ComponentSpec,
        mode: Mode,
        profiles: &Profiles,
        boundary: bool,
    ) -> Result<usize, Error> {
        let prefix = format!("{level}/{owner}");
        let block = emit_component_constraints(spec, &self.model.horizon, mode, &mut self.model.problem, &prefix, profiles)
            .map_err(|source| Error::Component {
                context: format!("{owner}/{}", spec.name),
                source,
            })?;
        self.model.components.push(PlacedComponent {
            owner: owner.to_string(),
            spec: spec.clone(),
            block,
            boundary: boundary && spec.archetype == Archetype::GridConnection,
        });
        Ok(self.model.components.len() - 1)
    }

    /// Declares a bus named `{level}/{owner}/{name}`; returns its index.
    pub fn add_bus(&mut self, level: &str, owner: &str, name: &str, carrier: Carrier) -> Result<usize, Error> {
        let full = format!("{level}/{owner}/{name}");
        if self.bus_index.contains_key(&full) {
            return Err(Error::InvalidInput(format!("bus `{full}` declared twice")));
        }
        let steps = self.model.horizon.steps();
        self.model.buses.push(BusBalance {
            name: full.clone(),
            carrier,
            terms: Vec::new(),
            injection: vec![0.0; steps],
        });
        self.bus_index.insert(full, self.model.buses.len() - 1);
        Ok(self.model.buses.len() - 1)
    }

    pub fn bus(&self, index: usize) -> &BusBalance {
        &self.model.buses[index]
    }

    /// Attaches a component port: outputs flow into the bus, inputs out of it.
    pub fn attach_port(&mut self, bus: usize, component: usize, port: Port) {
        let vars = self.model.components[component]
            .flow(port)
            .expect("attached port exists")
            .to_vec();
        let sign = match port {
            Port::Output => 1.0,
            Port::Input => -1.0,
        };
        self.attach_flow(bus, vars, sign);
    }

    pub fn attach_flow(&mut self, bus: usize, vars: Vec<VariableId>, sign: f64) {
        self.model.buses[bus].terms.push(BalanceTerm { vars, sign });
    }

    pub fn add_injection(&mut self, bus: usize, series: &[f64]) {
        for (acc, v) in self.model.buses[bus].injection.iter_mut().zip(series) {
            *acc += v;
        }
    }

    pub fn add_auxiliary(&mut self, column: &str, vars: Vec<VariableId>) {
        self.model.auxiliary.push(AuxiliaryFlow {
            column: column.to_string(),
            vars,
        });
    }

    /// Emits every component of `topo` under `{level}/{owner}` together with
    /// its buses. Grid connections are boundary grids when `boundary_grids`.
    pub fn add_prosumer(
        &mut self,
        level: &str,
        owner: &str,
        topo: &ProsumerTopology,
        modes: ModeSelection,
        profiles: &Profiles,
        boundary_grids: bool,
    ) -> Result<PlacedProsumer, Error> {
        let wiring = resolve_wiring(topo).map_err(|violations| Error::InvalidTopology {
            prosumer: topo.name.clone(),
            violations,
        })?;
        let mut components = Vec::with_capacity(topo.components.len());
        for spec in &topo.components {
            let mode = match modes {
                ModeSelection::PerComponent => spec.default_mode(),
                ModeSelection::Operation => Mode::Operation,
            };
            components.push(self.add_component(level, owner, spec, mode, profiles, boundary_grids)?);
        }
        let mut buses = Vec::with_capacity(wiring.buses.len());
        for rb in &wiring.buses {
            let b = self.add_bus(level, owner, &rb.name, rb.carrier)?;
            for &(c, port) in &rb.attachments {
                self.attach_port(b, components[c], port);
            }
            buses.push(b);
        }
        Ok(PlacedProsumer {
            name: topo.name.clone(),
            components,
            buses,
        })
    }

    /// Emits the balance rows `{bus}/balance/{t}` and returns the model.
    pub fn finish(mut self) -> Result<EnergyModel, Error> {
        let steps = self.model.horizon.steps();
        for bus in &self.model.buses {
            for t in 0..steps {
                let mut e = LinearExpression::new();
                for term in &bus.terms {
                    e.add_term(term.vars[t], term.sign);
                }
                self.model.problem.add_constraint(
                    &format!("{}/balance/{t}", bus.name),
                    e,
                    Relation::Equal,
                    -bus.injection[t],
                )?;
            }
        }
        Ok(self.model)
    }
}

/// Assembles a single prosumer: component blocks plus one balance per bus
/// and timestep. With [`Mode::Sizing`] each component keeps its own mode;
/// with [`Mode::Operation`] every capacity must be given.
pub fn assemble_model(
    topo: &ProsumerTopology,
    horizon: &Horizon,
    mode: Mode,
    profiles: &Profiles,
) -> Result<EnergyModel, Error> {
    let mut b = ModelBuilder::new(horizon.clone());
    b.add_prosumer("L1", &topo.name, topo, mode.into(), profiles, true)?;
    b.finish()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveStats {
    pub status: MilpStatus,
    pub gap: f64,
    pub nodes: usize,
    /// Largest bus balance residual of the returned values, kW.
    pub balance_residual: f64,
    /// Largest storage dynamics or closure residual, kWh.
    pub storage_residual: f64,
}

/// Solution of an [`EnergyModel`] with a feasible incumbent.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSolution {
    pub objective: f64,
    pub values: Vec<f64>,
    pub stats: SolveStats,
}

impl EnergyModel {
    /// Solves the model's problem with its current objective.
    pub fn solve(&self, options: &MilpOptions, context: &str) -> Result<ModelSolution, Error> {
        self.solve_variant(&self.problem, options, context)
    }

    /// Solves `problem`, a copy of this model's problem with extra rows or
    /// another objective, and checks the result against the model.
    pub fn solve_variant(&self, problem: &MilpProblem, options: &MilpOptions, context: &str) -> Result<ModelSolution, Error> {
        let sol = solve_milp_with(problem, options).map_err(|source| Error::Solve {
            context: context.to_string(),
            source,
        })?;
        match sol.status {
            MilpStatus::Infeasible => Err(Error::Infeasible {
                context: context.to_string(),
            }),
            MilpStatus::Unbounded => Err(Error::Unbounded {
                context: context.to_string(),
            }),
            MilpStatus::Optimal | MilpStatus::Feasible => {
                let values = sol.values.expect("incumbent has values");
                Ok(ModelSolution {
                    objective: sol.objective.expect("incumbent has an objective"),
                    stats: SolveStats {
                        status: sol.status,
                        gap: sol.gap,
                        nodes: sol.nodes_explored,
                        balance_residual: self.max_balance_residual(&values),
                        storage_residual: self.max_storage_residual(&values),
                    },
                    values,
                })
            }
        }
    }

    pub fn component_by_path(&self, path: &str) -> Option<&PlacedComponent> {
        self.components.iter().find(|c| c.block.path == path)
    }

    /// Capacities of every component that has one, keyed by path. Unlimited
    /// grid connections are omitted.
    pub fn capacities(&self, values: &[f64]) -> BTreeMap<String, f64> {
        self.components
            .iter()
            .filter_map(|c| {
                let cap = c.block.capacity?.value(values);
                cap.is_finite().then(|| (c.block.path.clone(), cap))
            })
            .collect()
    }

    /// Capacities that were decided by this model.
    pub fn sized_capacities(&self, values: &[f64]) -> BTreeMap<String, f64> {
        self.components
            .iter()
            .filter_map(|c| match c.block.capacity? {
                CapacityHandle::Sized(v) => Some((c.block.path.clone(), values[v.index()])),
                CapacityHandle::Fixed(_) => None,
            })
            .collect()
    }

    /// Every flow and state-of-charge series, keyed by column name.
    pub fn dispatch(&self, values: &[f64]) -> BTreeMap<String, Vec<f64>> {
        let series = |vars: &[VariableId]| vars.iter().map(|v| values[v.index()]).collect::<Vec<_>>();
        let mut out = BTreeMap::new();
        for c in &self.components {
            for port in c.spec.ports() {
                if let Some(vars) = c.flow(port) {
                    out.insert(c.column(port), series(vars));
                }
            }
            if !c.block.soc.is_empty() {
                out.insert(format!("{}/soc", c.block.path), self.soc_at_steps(c, values));
            }
        }
        for a in &self.auxiliary {
            out.insert(a.column.clone(), series(&a.vars));
        }
        out
    }

    /// SOC at the start of every step (the per-period end value is dropped).
    fn soc_at_steps(&self, c: &PlacedComponent, values: &[f64]) -> Vec<f64> {
        let len = self.horizon.period_length();
        (0..self.horizon.steps())
            .map(|t| values[c.block.soc_at(&self.horizon, t / len, t % len).index()])
            .collect()
    }

    /// Net boundary exchange per carrier (import − export) in kW.
    pub fn boundary_residual(&self, values: &[f64]) -> BTreeMap<Carrier, Vec<f64>> {
        let steps = self.horizon.steps();
        let mut out: BTreeMap<Carrier, Vec<f64>> = BTreeMap::new();
        for c in self.components.iter().filter(|c| c.boundary) {
            let carrier = c.spec.carrier().expect("grid has a carrier");
            let acc = out.entry(carrier).or_insert_with(|| vec![0.0; steps]);
            if let Some(imp) = c.flow(Port::Output) {
                for (a, v) in acc.iter_mut().zip(imp) {
                    *a += values[v.index()];
                }
            }
            if let Some(exp) = c.flow(Port::Input) {
                for (a, v) in acc.iter_mut().zip(exp) {
                    *a -= values[v.index()];
                }
            }
        }
        out
    }

    /// Largest bus balance residual in kW, recomputed from the values.
    pub fn max_balance_residual(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for bus in &self.buses {
            for t in 0..self.horizon.steps() {
                let net: f64 = bus.terms.iter().map(|term| term.sign * values[term.vars[t].index()]).sum::<f64>()
                    + bus.injection[t];
                worst = worst.max(net.abs());
            }
        }
        worst
    }

    /// Largest storage dynamics or cyclic-closure residual in kWh.
    pub fn max_storage_residual(&self, values: &[f64]) -> f64 {
        let h = &self.horizon;
        let mut worst = 0.0f64;
        for c in self.components.iter().filter(|c| !c.block.soc.is_empty()) {
            let ch = c.flow(Port::Input).unwrap();
            let dis = c.flow(Port::Output).unwrap();
            let soc = |p, tau| values[c.block.soc_at(h, p, tau).index()];
            for p in 0..h.periods() {
                for tau in 0..h.period_length() {
                    let t = p * h.period_length() + tau;
                    let expected = soc(p, tau)
                        + (c.spec.charge_efficiency * values[ch[t].index()]
                            - values[dis[t].index()] / c.spec.discharge_efficiency)
                            * h.dt_hours();
                    worst = worst.max((soc(p, tau + 1) - expected).abs());
                }
                worst = worst.max((soc(p, h.period_length()) - soc(p, 0)).abs());
            }
        }
        worst
    }
}
