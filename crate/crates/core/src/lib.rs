//! Multi-energy system models for buildings, districts and cities.
//!
//! Components (generators, storage, converters, grid connections and
//! demands) are wired into prosumer topologies and assembled into one MILP
//! per optimization run. Prosumers are optimized first; their sizes are then
//! frozen while districts re-optimize operation jointly, and districts in
//! turn enter a city transport model through their residual loads.

pub mod aggregation;
pub mod carrier;
pub mod component;
pub mod error;
pub mod hierarchy;
pub mod horizon;
pub mod model;
pub mod objective;
pub mod pareto;
pub mod topology;

pub use carrier::Carrier;
pub use component::{Archetype, ComponentSpec, Mode, Port, Profiles};
pub use error::Error;
pub use horizon::Horizon;
pub use model::{assemble_model, EnergyModel, ModelSolution};
pub use objective::{annuity_factor, build_objective, CostParameters, ObjectiveKind, ObjectiveSpec, PriceSeries};
pub use topology::{validate_topology, Bus, FlowLink, ProsumerTopology, Violation};

pub use strata_milp::{MilpOptions, MilpStatus};
