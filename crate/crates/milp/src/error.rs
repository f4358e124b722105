use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid bounds for `{name}`: lower {lower} > upper {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("name `{0}` is not representable in LP format")]
    InvalidName(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("node limit of {nodes} reached before any integer-feasible point was found")]
    NodeLimitExceeded { nodes: usize },
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("invalid solver parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}
