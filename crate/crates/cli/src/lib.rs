//! Scenario files in, result files out.
//!
//! A scenario is a JSON document naming the level to optimize (prosumer,
//! district or city), the topology, costs, objective and the CSV files that
//! hold its time series. [`load_scenario`] validates it, [`run_scenario`]
//! executes the pipeline and [`write_results`] writes the output directory.

pub mod profiles;
pub mod results;
pub mod run;
pub mod scenario;

pub use profiles::{parse_profiles, ProfileError, ProfileTable};
pub use results::write_results;
pub use run::{export_lp, run_scenario, ResultBundle, RunError, RunOptions};
pub use scenario::{load_scenario, parse_document, AggregationConfig, Level, ScenarioConfig, ScenarioError};
