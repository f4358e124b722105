#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use strata_cli::{load_scenario, run_scenario, write_results, ResultBundle, RunOptions};

pub fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn scenario_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            e.path().join("scenario.json").exists().then(|| e.file_name().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn scenario_path(name: &str) -> PathBuf {
    scenarios_dir().join(name).join("scenario.json")
}

pub fn run(name: &str) -> ResultBundle {
    let config = load_scenario(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    run_scenario(&config, &RunOptions::default()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn run_into(name: &str, out: &Path) -> ResultBundle {
    let bundle = run(name);
    write_results(&bundle, out).unwrap();
    bundle
}

/// Relative path → bytes of every file below `dir`.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap());
        }
    }
    out
}

/// Writes a scenario and its profile CSV into `dir` and returns the
/// scenario path.
pub fn write_scenario(dir: &Path, json: &str, csv: &str) -> PathBuf {
    std::fs::write(dir.join("profiles.csv"), csv).unwrap();
    let path = dir.join("scenario.json");
    std::fs::write(&path, json).unwrap();
    path
}
