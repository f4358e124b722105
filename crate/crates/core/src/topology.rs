//! Prosumer wiring: components, per-carrier buses and the links between them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::carrier::Carrier;
use crate::component::{is_valid_identifier, Archetype, ComponentSpec, Port};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bus {
    pub name: String,
    pub carrier: Carrier,
}

/// A connection between a component and a bus, or between two components.
///
/// `component → bus` attaches the component's output port, `bus → component`
/// its input port and `component → component` creates an implicit bus named
/// `{from}__{to}`. An undirected link attaches both ports of each component
/// endpoint and is only allowed for bidirectional components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowLink {
    pub from: String,
    pub to: String,
    pub directed: bool,
}

impl FlowLink {
    pub fn new(from: &str, to: &str) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            directed: true,
        }
    }

    pub fn undirected(a: &str, b: &str) -> Self {
        Self {
            directed: false,
            ..Self::new(a, b)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ProsumerTopology {
    pub name: String,
    pub components: Vec<ComponentSpec>,
    pub buses: Vec<Bus>,
    pub links: Vec<FlowLink>,
}

impl ProsumerTopology {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }

    pub fn with_component(mut self, spec: ComponentSpec) -> Self {
        self.components.push(spec);
        self
    }

    pub fn with_bus(mut self, name: &str, carrier: Carrier) -> Self {
        self.buses.push(Bus {
            name: name.to_string(),
            carrier,
        });
        self
    }

    pub fn with_link(mut self, from: &str, to: &str) -> Self {
        self.links.push(FlowLink::new(from, to));
        self
    }

    pub fn with_undirected_link(mut self, a: &str, b: &str) -> Self {
        self.links.push(FlowLink::undirected(a, b));
        self
    }

    pub fn component(&self, name: &str) -> Option<&ComponentSpec> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Carriers of the prosumer's grid connections, sorted.
    pub fn grid_carriers(&self) -> BTreeSet<Carrier> {
        self.components
            .iter()
            .filter(|c| c.archetype == Archetype::GridConnection)
            .filter_map(|c| c.carrier())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    InvalidComponent { component: String, reason: String },
    InvalidBusName { bus: String },
    DuplicateName { name: String },
    UnknownEndpoint { link: usize, name: String },
    InvalidLink { link: usize, reason: String },
    CarrierMismatch { component: String, port: Port, bus: String, expected: Carrier, found: Option<Carrier> },
    PortUnattached { component: String, port: Port },
    PortAttachedTwice { component: String, port: Port, buses: Vec<String> },
    BidirectionalNotAllowed { link: usize, component: String },
    UnreachableDemand { component: String, bus: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidComponent { component, reason } => write!(f, "component `{component}`: {reason}"),
            Violation::InvalidBusName { bus } => write!(f, "bus `{bus}`: invalid name"),
            Violation::DuplicateName { name } => write!(f, "name `{name}` is used more than once"),
            Violation::UnknownEndpoint { link, name } => write!(f, "link #{link}: unknown endpoint `{name}`"),
            Violation::InvalidLink { link, reason } => write!(f, "link #{link}: {reason}"),
            Violation::CarrierMismatch {
                component,
                port,
                bus,
                expected,
                found,
            } => match found {
                Some(c) => write!(f, "component `{component}` {port} carries {c} but bus `{bus}` carries {expected}"),
                None => write!(f, "component `{component}` has no {port} port to attach to bus `{bus}` ({expected})"),
            },
            Violation::PortUnattached { component, port } => {
                write!(f, "component `{component}`: {port} port is not attached to any bus")
            }
            Violation::PortAttachedTwice { component, port, buses } => write!(
                f,
                "component `{component}`: {port} port attached to several buses ({})",
                buses.join(", ")
            ),
            Violation::BidirectionalNotAllowed { link, component } => write!(
                f,
                "link #{link}: component `{component}` is not bidirectional"
            ),
            Violation::UnreachableDemand { component, bus } => write!(
                f,
                "demand `{component}` on bus `{bus}` is not reachable from any source"
            ),
        }
    }
}

/// A bus after link resolution, with its attached component ports.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedBus {
    pub name: String,
    pub carrier: Carrier,
    /// (component index, port), in link order.
    pub attachments: Vec<(usize, Port)>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Wiring {
    pub buses: Vec<ResolvedBus>,
}

/// Every violation of the topology invariants; empty iff the topology is valid.
pub fn validate_topology(topo: &ProsumerTopology) -> Vec<Violation> {
    match resolve_wiring(topo) {
        Ok(_) => Vec::new(),
        Err(v) => v,
    }
}

pub fn resolve_wiring(topo: &ProsumerTopology) -> Result<Wiring, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for c in &topo.components {
        for reason in c.validate() {
            violations.push(Violation::InvalidComponent {
                component: c.name.clone(),
                reason,
            });
        }
        if !seen.insert(c.name.as_str()) {
            violations.push(Violation::DuplicateName { name: c.name.clone() });
        }
    }
    for b in &topo.buses {
        if !is_valid_identifier(&b.name) {
            violations.push(Violation::InvalidBusName { bus: b.name.clone() });
        }
        if !seen.insert(b.name.as_str()) {
            violations.push(Violation::DuplicateName { name: b.name.clone() });
        }
    }

    let component_index: BTreeMap<&str, usize> =
        topo.components.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
    let mut buses: Vec<ResolvedBus> = topo
        .buses
        .iter()
        .map(|b| ResolvedBus {
            name: b.name.clone(),
            carrier: b.carrier,
            attachments: Vec::new(),
        })
        .collect();
    let mut bus_index: BTreeMap<String, usize> =
        buses.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();

    enum End {
        Comp(usize),
        Bus(usize),
    }

    for (li, link) in topo.links.iter().enumerate() {
        let lookup = |name: &str, bus_index: &BTreeMap<String, usize>| {
            component_index
                .get(name)
                .map(|&i| End::Comp(i))
                .or_else(|| bus_index.get(name).map(|&i| End::Bus(i)))
        };
        let (Some(from), Some(to)) = (lookup(&link.from, &bus_index), lookup(&link.to, &bus_index)) else {
            for name in [&link.from, &link.to] {
                if lookup(name, &bus_index).is_none() {
                    violations.push(Violation::UnknownEndpoint {
                        link: li,
                        name: name.clone(),
                    });
                }
            }
            continue;
        };
        let need_bidirectional = |c: usize, violations: &mut Vec<Violation>| {
            let ok = topo.components[c].bidirectional;
            if !ok {
                violations.push(Violation::BidirectionalNotAllowed {
                    link: li,
                    component: topo.components[c].name.clone(),
                });
            }
            ok
        };
        let attach = |bus: usize, c: usize, port: Port, buses: &mut Vec<ResolvedBus>, violations: &mut Vec<Violation>| {
            let spec = &topo.components[c];
            let found = if spec.ports().contains(&port) {
                spec.port_carrier(port)
            } else {
                None
            };
            if found != Some(buses[bus].carrier) {
                violations.push(Violation::CarrierMismatch {
                    component: spec.name.clone(),
                    port,
                    bus: buses[bus].name.clone(),
                    expected: buses[bus].carrier,
                    found,
                });
            } else {
                buses[bus].attachments.push((c, port));
            }
        };
        match (from, to) {
            (End::Bus(_), End::Bus(_)) => violations.push(Violation::InvalidLink {
                link: li,
                reason: "a link cannot join two buses".into(),
            }),
            (End::Comp(c), End::Bus(b)) | (End::Bus(b), End::Comp(c)) if !link.directed => {
                if need_bidirectional(c, &mut violations) {
                    attach(b, c, Port::Output, &mut buses, &mut violations);
                    attach(b, c, Port::Input, &mut buses, &mut violations);
                }
            }
            (End::Comp(c), End::Bus(b)) => attach(b, c, Port::Output, &mut buses, &mut violations),
            (End::Bus(b), End::Comp(c)) => attach(b, c, Port::Input, &mut buses, &mut violations),
            (End::Comp(a), End::Comp(c)) => {
                if a == c {
                    violations.push(Violation::InvalidLink {
                        link: li,
                        reason: "a component cannot be linked to itself".into(),
                    });
                    continue;
                }
                let Some(carrier) = topo.components[a].port_carrier(Port::Output) else {
                    violations.push(Violation::InvalidLink {
                        link: li,
                        reason: format!("component `{}` has no output carrier", link.from),
                    });
                    continue;
                };
                let name = format!("{}__{}", link.from, link.to);
                if bus_index.contains_key(&name) || component_index.contains_key(name.as_str()) {
                    violations.push(Violation::DuplicateName { name });
                    continue;
                }
                let b = buses.len();
                buses.push(ResolvedBus {
                    name: name.clone(),
                    carrier,
                    attachments: Vec::new(),
                });
                bus_index.insert(name, b);
                if link.directed {
                    attach(b, a, Port::Output, &mut buses, &mut violations);
                    attach(b, c, Port::Input, &mut buses, &mut violations);
                } else if need_bidirectional(a, &mut violations) & need_bidirectional(c, &mut violations) {
                    for comp in [a, c] {
                        attach(b, comp, Port::Output, &mut buses, &mut violations);
                        attach(b, comp, Port::Input, &mut buses, &mut violations);
                    }
                }
            }
        }
    }

    // every port on exactly one bus
    let mut attached: BTreeMap<(usize, Port), Vec<String>> = BTreeMap::new();
    for bus in &buses {
        for &(c, port) in &bus.attachments {
            attached.entry((c, port)).or_default().push(bus.name.clone());
        }
    }
    for (c, spec) in topo.components.iter().enumerate() {
        for port in spec.ports() {
            match attached.get(&(c, port)) {
                None => violations.push(Violation::PortUnattached {
                    component: spec.name.clone(),
                    port,
                }),
                Some(list) if list.len() > 1 => violations.push(Violation::PortAttachedTwice {
                    component: spec.name.clone(),
                    port,
                    buses: list.clone(),
                }),
                Some(_) => {}
            }
        }
    }

    // a bus is supplied when a generator, grid or storage feeds it, or a
    // converter whose own input bus is supplied
    let mut supplied = vec![false; buses.len()];
    loop {
        let mut changed = false;
        for (bi, bus) in buses.iter().enumerate() {
            if supplied[bi] {
                continue;
            }
            let fed = bus.attachments.iter().any(|&(c, port)| {
                port == Port::Output
                    && match topo.components[c].archetype {
                        Archetype::Generator | Archetype::GridConnection | Archetype::Storage => true,
                        Archetype::Converter => buses
                            .iter()
                            .enumerate()
                            .any(|(bj, other)| supplied[bj] && other.attachments.contains(&(c, Port::Input))),
                        Archetype::Demand => false,
                    }
            });
            if fed {
                supplied[bi] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for (bi, bus) in buses.iter().enumerate() {
        for &(c, port) in &bus.attachments {
            if port == Port::Input && topo.components[c].archetype == Archetype::Demand && !supplied[bi] {
                violations.push(Violation::UnreachableDemand {
                    component: topo.components[c].name.clone(),
                    bus: bus.name.clone(),
                });
            }
        }
    }

    if violations.is_empty() {
        Ok(Wiring { buses })
    } else {
        Err(violations)
    }
}
