use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use strata_cli::scenario::{ParetoConfig, SchemaViolation};
use strata_cli::{export_lp, load_scenario, run_scenario, write_results, AggregationConfig, RunError, RunOptions, ScenarioError};

#[derive(Parser)]
#[command(name = "strata", version, about = "Hierarchical multi-energy system optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a scenario and write its result files.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the LP file of every model solved into this directory.
        #[arg(long)]
        lp_export: Option<PathBuf>,
        /// Relative MIP gap at which branch and bound stops.
        #[arg(long)]
        rel_gap: Option<f64>,
        /// Number of Pareto points; needs a `pareto` section in the scenario.
        #[arg(long)]
        pareto: Option<usize>,
        /// Typical-period aggregation as `<k>x<period_length>`, e.g. `4x24`.
        #[arg(long, value_parser = parse_aggregation)]
        aggregate: Option<AggregationConfig>,
        #[arg(long)]
        verbose: bool,
    },
    /// Check a scenario and its profile files without solving.
    Validate { scenario: PathBuf },
    /// Write the LP file of the scenario's top-level model.
    ExportLp {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_aggregation(s: &str) -> Result<AggregationConfig, String> {
    let (k, l) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("`{s}` is not of the form <k>x<period_length>"))?;
    let parse = |v: &str, what: &str| match v.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("{what} `{v}` must be a positive integer")),
    };
    Ok(AggregationConfig {
        k: parse(k, "k")?,
        period_length: parse(l, "period length")?,
    })
}

fn schema_error(scenario: &std::path::Path, path: &str, message: String) -> RunError {
    RunError::Scenario(ScenarioError::Schema {
        file: scenario.display().to_string(),
        errors: vec![SchemaViolation {
            path: path.into(),
            message,
        }],
    })
}

fn execute(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run {
            scenario,
            out,
            lp_export,
            rel_gap,
            pareto,
            aggregate,
            verbose,
        } => {
            let mut config = load_scenario(&scenario)?;
            let doc = &mut config.document;
            if let Some(g) = rel_gap {
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(schema_error(&scenario, "--rel-gap", format!("{g} must be a non-negative number")));
                }
                doc.options.rel_gap = g;
            }
            if let Some(n) = pareto {
                match &mut doc.pareto {
                    Some(ParetoConfig { points, .. }) if n >= 2 => *points = n,
                    Some(_) => return Err(schema_error(&scenario, "--pareto", "a front needs at least 2 points".into())),
                    None => {
                        return Err(schema_error(
                            &scenario,
                            "pareto",
                            "--pareto needs a `pareto` section naming the second objective".into(),
                        ))
                    }
                }
            }
            if let Some(a) = aggregate {
                let steps = config.timestamps.len();
                if config.profiles.is_empty() || steps % a.period_length != 0 || a.k > steps / a.period_length {
                    return Err(schema_error(
                        &scenario,
                        "--aggregate",
                        format!("{}x{} does not fit {steps} steps", a.k, a.period_length),
                    ));
                }
                config.document.aggregation = Some(a);
            }
            let bundle = run_scenario(&config, &RunOptions { lp_export, verbose })?;
            let manifest = write_results(&bundle, &out)?;
            for path in manifest {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let config = load_scenario(&scenario)?;
            let doc = &config.document;
            println!(
                "{}: valid {} scenario, {} steps, {} prosumer(s), {} district(s)",
                scenario.display(),
                doc.level.as_str(),
                config.timestamps.len(),
                doc.prosumers.len(),
                doc.districts.len()
            );
            Ok(())
        }
        Command::ExportLp { scenario, out } => {
            let config = load_scenario(&scenario)?;
            for path in export_lp(&config, &out)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
