//! Mixed-integer linear programs: an exact in-memory model, CPLEX-LP text
//! I/O, and a self-contained dense simplex / branch-and-bound solver sized
//! for desk-scale energy system models.

pub mod branch_bound;
pub mod error;
pub mod lp_format;
pub mod problem;
pub mod simplex;

pub use branch_bound::{solve_milp, solve_milp_with, MilpOptions, MilpSolution, MilpStatus};
pub use error::{LpParseError, ModelError, SolveError};
pub use lp_format::{parse_lp, write_lp};
pub use problem::{Constraint, ConstraintId, LinearExpression, MilpProblem, Relation, Sense, Variable, VariableId};
pub use simplex::{solve_lp, solve_lp_with_bounds, LpSolution, LpStatus};
