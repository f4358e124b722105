use strata_milp::{ModelError, SolveError};
use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::component::ComponentError;
use crate::topology::Violation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("prosumer `{prosumer}`: invalid topology: {}", join(violations))]
    InvalidTopology { prosumer: String, violations: Vec<Violation> },
    #[error("{context}: {source}")]
    Component {
        context: String,
        #[source]
        source: ComponentError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{context}: {source}")]
    Solve {
        context: String,
        #[source]
        source: SolveError,
    },
    #[error("{context}: problem is infeasible")]
    Infeasible { context: String },
    #[error("{context}: problem is unbounded")]
    Unbounded { context: String },
    #[error("missing cost parameter: {0}")]
    MissingCostParameter(String),
    #[error("unknown quantity `{0}`")]
    UnknownQuantity(String),
    #[error("prosumer `{prosumer}`: no level-1 capacity for component `{component}`")]
    FrozenCapacityMissing { prosumer: String, component: String },
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error("{0}")]
    InvalidInput(String),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
