//! Result files. Everything written here is a pure function of the bundle
//! minus its wall time, so identical runs give identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::run::{write_file, EntitySummary, ParetoRow, ResultBundle, RunError, RESIDUAL_TOL};

/// Values closer to zero than this are written as `0`.
pub const ZERO_CLEAN: f64 = 1e-10;

pub fn clean(v: f64) -> f64 {
    if v.abs() < ZERO_CLEAN {
        0.0
    } else {
        v
    }
}

/// Shortest decimal text that reads back to the same value.
pub fn format_value(v: f64) -> String {
    format!("{}", clean(v))
}

fn number(v: f64) -> Value {
    let v = clean(v);
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn entity_json(e: &EntitySummary) -> Value {
    let capacities: Map<String, Value> = e.capacities.iter().map(|(k, v)| (k.clone(), number(*v))).collect();
    let mut out = json!({
        "name": e.name,
        "objective": number(e.objective),
        "capacities": capacities,
        "status": format!("{:?}", e.stats.status),
        "gap": number(e.stats.gap),
        "nodes": e.stats.nodes,
        "balance_residual": number(e.stats.balance_residual),
        "storage_residual": number(e.stats.storage_residual),
    });
    if let Some(m) = e.monolithic_objective {
        out["monolithic_objective"] = number(m);
        out["decomposition_gap"] = number(e.objective - m);
    }
    out
}

fn summary(bundle: &ResultBundle) -> String {
    let mut levels: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for e in &bundle.entities {
        levels.entry(e.level).or_default().push(entity_json(e));
    }
    let mut root = json!({
        "scenario": bundle.scenario,
        "level": bundle.level.as_str(),
        "objective": bundle.objective,
        "steps": bundle.timestamps.len(),
        "dt_hours": number(bundle.dt_hours),
        "results": levels,
    });
    if let Some(label) = &bundle.pareto_objective {
        root["pareto"] = json!({ "objective_b": label, "points": bundle.pareto.len() });
    }
    if let Some(set) = &bundle.aggregation {
        root["aggregation"] = json!({ "period_length": set.period_length, "k": set.k() });
    }
    let mut text = serde_json::to_string_pretty(&root).expect("plain JSON values serialize");
    text.push('\n');
    text
}

fn series_csv(timestamps: &[String], columns: &BTreeMap<String, Vec<f64>>) -> String {
    let mut out = String::from("timestamp");
    for name in columns.keys() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (t, ts) in timestamps.iter().enumerate() {
        out.push_str(ts);
        for s in columns.values() {
            out.push(',');
            out.push_str(&format_value(s[t]));
        }
        out.push('\n');
    }
    out
}

/// One row per point; after the objectives comes one column per sized
/// capacity, named `{level}/{component path}/capacity`.
fn pareto_csv(bundle: &ResultBundle) -> String {
    let column = |row: &ParetoRow, path: &str| {
        let level = row.entity.split('/').next().unwrap_or_default();
        format!("{level}/{path}/capacity")
    };
    let columns: BTreeSet<String> = bundle
        .pareto
        .iter()
        .flat_map(|row| row.capacities.keys().map(move |path| column(row, path)))
        .collect();
    let mut out = String::from("entity,point,objective_a,objective_b");
    for c in &columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for row in &bundle.pareto {
        let i = index.entry(&row.entity).or_default();
        let _ = write!(
            out,
            "{},{},{},{}",
            row.entity,
            i,
            format_value(row.objective_a),
            format_value(row.objective_b)
        );
        let values: BTreeMap<String, f64> = row.capacities.iter().map(|(p, v)| (column(row, p), *v)).collect();
        for c in &columns {
            out.push(',');
            if let Some(v) = values.get(c) {
                out.push_str(&format_value(*v));
            }
        }
        out.push('\n');
        *i += 1;
    }
    out
}

fn aggregation_csv(bundle: &ResultBundle) -> Option<String> {
    let set = bundle.aggregation.as_ref()?;
    let l = set.period_length;
    let mut out = String::from("period,start,typical_period,medoid_start,weight\n");
    for (p, &j) in set.assignment.iter().enumerate() {
        let _ = writeln!(
            out,
            "{p},{},{j},{},{}",
            bundle.timestamps[p * l],
            bundle.timestamps[set.medoids[j] * l],
            format_value(set.weights[j])
        );
    }
    Some(out)
}

/// Re-checks every reported solution against the balance tolerance.
pub fn verify_bundle(bundle: &ResultBundle) -> Result<(), RunError> {
    for e in &bundle.entities {
        if !(e.stats.balance_residual <= RESIDUAL_TOL && e.stats.storage_residual <= RESIDUAL_TOL) {
            return Err(RunError::Verification {
                entity: format!("{}/{}", e.level, e.name),
                balance: e.stats.balance_residual,
                storage: e.stats.storage_residual,
            });
        }
    }
    let steps = bundle.timestamps.len();
    for (name, s) in bundle.dispatch.iter().chain(&bundle.residual_load) {
        if s.len() != steps || s.iter().any(|v| !v.is_finite()) {
            return Err(RunError::Verification {
                entity: name.clone(),
                balance: f64::NAN,
                storage: f64::NAN,
            });
        }
    }
    Ok(())
}

/// Writes the result files into `out_dir` and returns their paths.
/// `pareto.csv` and `aggregation.csv` only appear when there is data for them.
pub fn write_results(bundle: &ResultBundle, out_dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    verify_bundle(bundle)?;
    let mut files = vec![
        ("summary.json", summary(bundle)),
        ("dispatch.csv", series_csv(&bundle.timestamps, &bundle.dispatch)),
        ("residual_load.csv", series_csv(&bundle.timestamps, &bundle.residual_load)),
    ];
    if bundle.pareto_objective.is_some() {
        files.push(("pareto.csv", pareto_csv(bundle)));
    }
    if let Some(text) = aggregation_csv(bundle) {
        files.push(("aggregation.csv", text));
    }
    files.sort_by(|a, b| a.0.cmp(b.0));
    let mut manifest = Vec::new();
    for (name, text) in files {
        let path = out_dir.join(name);
        write_file(&path, &text)?;
        manifest.push(path);
    }
    Ok(manifest)
}
