//! Scenario documents: JSON parsing, schema validation with full error
//! collection, and resolution of the referenced profile files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use serde_json::{Map, Value};
use strata::hierarchy::{CentralPlant, DistrictSpec, TransferLink};
use strata::objective::ObjectiveKind;
use strata::{
    validate_topology, Archetype, Carrier, ComponentSpec, Mode, ObjectiveSpec, Profiles, ProsumerTopology,
};
use strata_milp::{MilpOptions, Sense};
use thiserror::Error;

use crate::profiles::{parse_profiles, parse_timestamp};

pub const DEFAULT_DT_HOURS: f64 = 1.0;
pub const DEFAULT_REL_GAP: f64 = 1e-6;
pub const DEFAULT_PARETO_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct SchemaViolation {
    /// Location in the document, e.g. `prosumers[0].components[2].capacity`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{file}:{line}:{column}: malformed scenario document: {message}")]
    Parse {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{file}: {} schema violation(s):\n{}", errors.len(), list(errors))]
    Schema { file: String, errors: Vec<SchemaViolation> },
    #[error("file not found: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

fn list(errors: &[SchemaViolation]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Prosumer,
    District,
    City,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Prosumer => "prosumer",
            Level::District => "district",
            Level::City => "city",
        }
    }
}

/// A price given as a constant or as the name of a profile column.
#[derive(Clone, Debug, PartialEq)]
pub enum PriceRef {
    Scalar(f64),
    Profile(String),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CostConfig {
    pub interest_rate: Option<f64>,
    pub import_price: BTreeMap<Carrier, PriceRef>,
    pub export_remuneration: BTreeMap<Carrier, PriceRef>,
    pub co2_factor: BTreeMap<Carrier, f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AggregationConfig {
    pub period_length: usize,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoConfig {
    /// Second objective, traded against the scenario objective.
    pub objective: ObjectiveSpec,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistrictConfig {
    pub spec: DistrictSpec,
    /// Energy-neutral load shifting band offered to the city, kW per carrier.
    pub flexibility: BTreeMap<Carrier, f64>,
    /// Also solve the monolithic reference and report the decomposition gap.
    pub monolithic_reference: bool,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CityConfig {
    pub links: Vec<TransferLink>,
    pub plants: Vec<CentralPlant>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonConfig {
    pub steps: Option<usize>,
    pub dt_hours: f64,
    pub start: Option<NaiveDateTime>,
}

/// A validated scenario document whose profile files have not been read.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDocument {
    pub name: String,
    pub level: Level,
    pub horizon: HorizonConfig,
    pub profile_files: Vec<String>,
    pub objective: ObjectiveSpec,
    pub pareto: Option<ParetoConfig>,
    pub cost: CostConfig,
    pub aggregation: Option<AggregationConfig>,
    pub options: MilpOptions,
    pub prosumers: Vec<ProsumerTopology>,
    pub districts: Vec<DistrictConfig>,
    pub city: Option<CityConfig>,
}

/// A scenario ready to run: the document plus its loaded time series.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub document: ScenarioDocument,
    /// Start of every timestep of the full horizon.
    pub timestamps: Vec<NaiveDateTime>,
    pub profiles: Profiles,
}

impl ScenarioConfig {
    pub fn steps(&self) -> usize {
        self.timestamps.len()
    }
}

/// Reads, validates and resolves the scenario at `path`. Relative profile
/// paths are taken relative to the scenario's directory.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = read(path)?;
    let file = path.display().to_string();
    let doc = parse_document(&text).map_err(|e| with_file(e, &file))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(doc, base, &file)
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ScenarioError::MissingFile { path: path.to_path_buf() },
        _ => ScenarioError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    })
}

fn with_file(e: ScenarioError, file: &str) -> ScenarioError {
    match e {
        ScenarioError::Parse { line, column, message, .. } => ScenarioError::Parse {
            file: file.to_string(),
            line,
            column,
            message,
        },
        ScenarioError::Schema { errors, .. } => ScenarioError::Schema {
            file: file.to_string(),
            errors,
        },
        other => other,
    }
}

/// Parses and validates a scenario document without touching the file
/// system.
pub fn parse_document(text: &str) -> Result<ScenarioDocument, ScenarioError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        file: "<input>".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut v = Validator::default();
    let doc = v.document(&value);
    match doc {
        Some(doc) if v.errors.is_empty() => Ok(doc),
        _ => Err(ScenarioError::Schema {
            file: "<input>".into(),
            errors: v.errors,
        }),
    }
}

/// Loads the profile files of `doc` and checks everything that depends on
/// their contents.
pub fn resolve(doc: ScenarioDocument, base: &Path, file: &str) -> Result<ScenarioConfig, ScenarioError> {
    let mut errors = Vec::new();
    let mut err = |path: String, message: String| errors.push(SchemaViolation { path, message });

    let mut profiles = Profiles::new();
    let mut timestamps: Option<Vec<NaiveDateTime>> = None;
    for (i, name) in doc.profile_files.iter().enumerate() {
        let path = base.join(name);
        let text = read(&path)?;
        let table = match parse_profiles(&text) {
            Ok(t) => t,
            Err(e) => {
                err(format!("profiles[{i}]"), format!("{}: {e}", path.display()));
                continue;
            }
        };
        match &timestamps {
            Some(ts) if *ts != table.timestamps => err(
                format!("profiles[{i}]"),
                format!("{}: timestamps differ from the first profile file", path.display()),
            ),
            Some(_) => {}
            None => timestamps = Some(table.timestamps.clone()),
        }
        for (column, series) in table.columns {
            if profiles.contains_key(&column) {
                err(format!("profiles[{i}]"), format!("profile `{column}` is defined in more than one file"));
            }
            profiles.insert(column, series);
        }
    }

    let dt = doc.horizon.dt_hours;
    let step = Duration::milliseconds((dt * 3_600_000.0).round() as i64);
    let timestamps = match (timestamps, doc.horizon.steps, doc.horizon.start) {
        (Some(ts), steps, start) => {
            if let Some(s) = steps.filter(|&s| s != ts.len()) {
                err("horizon.steps".into(), format!("{s} steps but the profiles have {} rows", ts.len()));
            }
            if let Some(start) = start.filter(|&s| s != ts[0]) {
                err(
                    "horizon.start".into(),
                    format!("{start} does not match the first profile timestamp {}", ts[0]),
                );
            }
            if let Some(w) = ts.windows(2).position(|w| w[1] - w[0] != step) {
                err(
                    "profiles".into(),
                    format!("timestamps {} and {} are not {dt} h apart", ts[w], ts[w + 1]),
                );
            }
            ts
        }
        (None, Some(steps), Some(start)) => (0..steps).map(|t| start + step * t as i32).collect(),
        (None, _, _) => {
            err(
                "horizon".into(),
                "`steps` and `start` are required when no profile files are given".into(),
            );
            Vec::new()
        }
    };
    let steps = timestamps.len();

    let mut check_profile = |path: String, name: &str| {
        if !profiles.contains_key(name) {
            err(path, format!("unknown profile `{name}`"));
        }
    };
    for (i, p) in doc.prosumers.iter().enumerate() {
        for (j, c) in p.components.iter().enumerate() {
            if let Some(name) = &c.profile {
                check_profile(format!("prosumers[{i}].components[{j}].profile"), name);
            }
        }
    }
    for (i, d) in doc.districts.iter().enumerate() {
        for (j, c) in d.spec.central.iter().chain(&d.spec.shared_grids).enumerate() {
            if let Some(name) = &c.profile {
                check_profile(format!("districts[{i}].components[{j}].profile"), name);
            }
        }
    }
    if let Some(city) = &doc.city {
        for (j, p) in city.plants.iter().enumerate() {
            if let Some(name) = &p.spec.profile {
                check_profile(format!("city.plants[{j}].component.profile"), name);
            }
        }
    }
    for (field, prices) in [
        ("import_price", &doc.cost.import_price),
        ("export_remuneration", &doc.cost.export_remuneration),
    ] {
        for (carrier, p) in prices {
            if let PriceRef::Profile(name) = p {
                check_profile(format!("costs.{field}.{carrier}"), name);
            }
        }
    }
    if let Some(a) = doc.aggregation {
        if profiles.is_empty() {
            err("aggregation".into(), "aggregation needs at least one profile".into());
        } else if steps % a.period_length != 0 {
            err(
                "aggregation.period_length".into(),
                format!("{steps} steps are not a multiple of {}", a.period_length),
            );
        } else if a.k > steps / a.period_length {
            err("aggregation.k".into(), format!("k = {} exceeds the {} periods", a.k, steps / a.period_length));
        }
    }

    if !errors.is_empty() {
        return Err(ScenarioError::Schema {
            file: file.to_string(),
            errors,
        });
    }
    Ok(ScenarioConfig {
        document: doc,
        timestamps,
        profiles,
    })
}

#[derive(Default)]
struct Validator {
    errors: Vec<SchemaViolation>,
}

fn at(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Validator {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(SchemaViolation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        let Some(map) = v.as_object() else {
            self.error(path, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                self.error(at(path, key), "unknown field");
            }
        }
        Some(map)
    }

    fn array<'a>(&mut self, map: &'a Map<String, Value>, key: &str, path: &str) -> &'a [Value] {
        match map.get(key) {
            None => &[],
            Some(Value::Array(a)) => a,
            Some(_) => {
                self.error(at(path, key), "expected an array");
                &[]
            }
        }
    }

    fn string(&mut self, map: &Map<String, Value>, key: &str, path: &str, required: bool) -> Option<String> {
        match map.get(key) {
            None if required => {
                self.error(at(path, key), "required field is missing");
                None
            }
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.error(at(path, key), "expected a string");
                None
            }
        }
    }

    fn number(&mut self, map: &Map<String, Value>, key: &str, path: &str) -> Option<f64> {
        match map.get(key) {
            None => None,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.error(at(path, key), "expected a number");
                    None
                }
            },
        }
    }

    fn non_negative(&mut self, map: &Map<String, Value>, key: &str, path: &str) -> Option<f64> {
        let x = self.number(map, key, path)?;
        if x < 0.0 {
            self.error(at(path, key), format!("{x} must not be negative"));
            return None;
        }
        Some(x)
    }

    fn count(&mut self, map: &Map<String, Value>, key: &str, path: &str) -> Option<usize> {
        match map.get(key) {
            None => None,
            Some(v) => match v.as_u64() {
                Some(n) if n >= 1 && n <= u32::MAX as u64 => Some(n as usize),
                _ => {
                    self.error(at(path, key), "expected a positive integer");
                    None
                }
            },
        }
    }

    fn boolean(&mut self, map: &Map<String, Value>, key: &str, path: &str) -> Option<bool> {
        match map.get(key) {
            None => None,
            Some(Value::Bool(b)) => Some(*b),
            Some(_) => {
                self.error(at(path, key), "expected true or false");
                None
            }
        }
    }

    fn carrier(&mut self, map: &Map<String, Value>, key: &str, path: &str, required: bool) -> Option<Carrier> {
        let s = self.string(map, key, path, required)?;
        self.carrier_name(&s, &at(path, key))
    }

    fn carrier_name(&mut self, s: &str, path: &str) -> Option<Carrier> {
        match s.parse() {
            Ok(c) => Some(c),
            Err(e) => {
                self.error(path, format!("{e}"));
                None
            }
        }
    }

    /// An object keyed by carrier name.
    fn per_carrier<T>(
        &mut self,
        map: &Map<String, Value>,
        key: &str,
        path: &str,
        mut item: impl FnMut(&mut Self, &Value, &str) -> Option<T>,
    ) -> BTreeMap<Carrier, T> {
        let mut out = BTreeMap::new();
        let path = at(path, key);
        match map.get(key) {
            None => {}
            Some(Value::Object(m)) => {
                for (k, v) in m {
                    let p = at(&path, k);
                    let carrier = self.carrier_name(k, &p);
                    if let (Some(c), Some(x)) = (carrier, item(self, v, &p)) {
                        out.insert(c, x);
                    }
                }
            }
            Some(_) => self.error(path, "expected an object keyed by carrier"),
        }
        out
    }

    fn document(&mut self, v: &Value) -> Option<ScenarioDocument> {
        let root = self.object(
            v,
            "",
            &[
                "name",
                "level",
                "horizon",
                "profiles",
                "objective",
                "pareto",
                "costs",
                "aggregation",
                "solver",
                "prosumers",
                "districts",
                "city",
            ],
        )?;
        let name = self.string(root, "name", "", true).unwrap_or_default();
        let level = match self.string(root, "level", "", true).as_deref() {
            None => None,
            Some("prosumer") => Some(Level::Prosumer),
            Some("district") => Some(Level::District),
            Some("city") => Some(Level::City),
            Some(other) => {
                self.error("level", format!("`{other}` is not one of prosumer, district, city"));
                None
            }
        };
        let horizon = self.horizon(root.get("horizon"));
        let profile_files = match root.get("profiles") {
            None => Vec::new(),
            Some(Value::String(s)) => vec![s.clone()],
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .filter_map(|(i, f)| match f.as_str() {
                    Some(s) => Some(s.to_string()),
                    None => {
                        self.error(format!("profiles[{i}]"), "expected a file name");
                        None
                    }
                })
                .collect(),
            Some(_) => {
                self.error("profiles", "expected a file name or a list of file names");
                Vec::new()
            }
        };
        let objective = match root.get("objective") {
            Some(o) => self.objective(o, "objective"),
            None => {
                self.error("objective", "required field is missing");
                None
            }
        };
        let pareto = root.get("pareto").and_then(|p| self.pareto(p));
        let cost = match root.get("costs") {
            Some(c) => self.costs(c),
            None => CostConfig::default(),
        };
        for (spec, path) in [(objective.as_ref(), "objective"), (pareto.as_ref().map(|p| &p.objective), "pareto.objective")] {
            if let Some(spec) = spec {
                self.check_cost_parameters(spec, &cost, path);
            }
        }
        let aggregation = root.get("aggregation").and_then(|a| self.aggregation(a));
        let options = self.solver(root.get("solver"));

        let prosumers: Vec<ProsumerTopology> = self
            .array(root, "prosumers", "")
            .iter()
            .enumerate()
            .filter_map(|(i, p)| self.prosumer(p, &format!("prosumers[{i}]")))
            .collect();
        let mut seen = BTreeSet::new();
        for (i, p) in prosumers.iter().enumerate() {
            if !seen.insert(p.name.clone()) {
                self.error(format!("prosumers[{i}].name"), format!("prosumer `{}` is defined twice", p.name));
            }
        }
        let districts: Vec<DistrictConfig> = self
            .array(root, "districts", "")
            .iter()
            .enumerate()
            .filter_map(|(i, d)| self.district(d, &format!("districts[{i}]"), &prosumers))
            .collect();
        let city = root.get("city").and_then(|c| self.city(c, &districts));

        let level = level?;
        self.level_requirements(level, &prosumers, &districts, city.as_ref());
        Some(ScenarioDocument {
            name,
            level,
            horizon: horizon?,
            profile_files,
            objective: objective?,
            pareto,
            cost,
            aggregation,
            options,
            prosumers,
            districts,
            city,
        })
    }

    fn level_requirements(&mut self, level: Level, prosumers: &[ProsumerTopology], districts: &[DistrictConfig], city: Option<&CityConfig>) {
        if prosumers.is_empty() {
            self.error("prosumers", "at least one prosumer is required");
        }
        if level == Level::Prosumer {
            return;
        }
        if districts.is_empty() {
            self.error("districts", format!("level `{}` needs at least one district", level.as_str()));
        }
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for d in districts {
            for m in &d.spec.members {
                if let Some(prev) = owner.insert(&m.name, &d.spec.name) {
                    self.error(
                        "districts",
                        format!("prosumer `{}` belongs to both `{prev}` and `{}`", m.name, d.spec.name),
                    );
                }
            }
        }
        for p in prosumers {
            if !owner.contains_key(p.name.as_str()) {
                self.error("districts", format!("prosumer `{}` is not a member of any district", p.name));
            }
        }
        if level == Level::City && city.is_none() {
            self.error("city", "level `city` needs a `city` section");
        }
    }

    fn horizon(&mut self, v: Option<&Value>) -> Option<HorizonConfig> {
        let Some(v) = v else {
            return Some(HorizonConfig {
                steps: None,
                dt_hours: DEFAULT_DT_HOURS,
                start: None,
            });
        };
        let map = self.object(v, "horizon", &["steps", "dt_hours", "start"])?;
        let steps = self.count(map, "steps", "horizon");
        let dt_hours = match self.number(map, "dt_hours", "horizon") {
            Some(dt) if dt > 0.0 => dt,
            Some(dt) => {
                self.error("horizon.dt_hours", format!("{dt} must be positive"));
                DEFAULT_DT_HOURS
            }
            None => DEFAULT_DT_HOURS,
        };
        let start = self.string(map, "start", "horizon", false).and_then(|s| {
            let t = parse_timestamp(&s);
            if t.is_none() {
                self.error("horizon.start", format!("`{s}` is not an ISO-8601 timestamp"));
            }
            t
        });
        Some(HorizonConfig { steps, dt_hours, start })
    }

    fn objective(&mut self, v: &Value, path: &str) -> Option<ObjectiveSpec> {
        let map = self.object(v, path, &["kind", "terms", "sense"])?;
        let kind_name = self.string(map, "kind", path, true)?;
        let Some(kind) = ObjectiveKind::parse(&kind_name) else {
            self.error(
                at(path, "kind"),
                format!("`{kind_name}` is not one of Annuity, OperatingCost, CO2, SelfConsumption, Custom"),
            );
            return None;
        };
        let sense = match self.string(map, "sense", path, false).as_deref() {
            None => None,
            Some(s) if s.eq_ignore_ascii_case("minimize") => Some(Sense::Minimize),
            Some(s) if s.eq_ignore_ascii_case("maximize") => Some(Sense::Maximize),
            Some(s) => {
                self.error(at(path, "sense"), format!("`{s}` is not minimize or maximize"));
                None
            }
        };
        if kind != ObjectiveKind::Custom {
            if map.contains_key("terms") {
                self.error(at(path, "terms"), "only custom objectives take terms");
            }
            if map.contains_key("sense") {
                self.error(at(path, "sense"), "only custom objectives take a sense");
            }
            return Some(ObjectiveSpec::new(kind));
        }
        let mut terms = BTreeMap::new();
        match map.get("terms") {
            Some(Value::Object(m)) if !m.is_empty() => {
                for (k, w) in m {
                    match w.as_f64() {
                        Some(w) if w.is_finite() => {
                            terms.insert(k.clone(), w);
                        }
                        _ => self.error(at(&at(path, "terms"), k), "expected a number"),
                    }
                }
            }
            _ => self.error(at(path, "terms"), "a custom objective needs a non-empty object of quantity weights"),
        }
        Some(ObjectiveSpec::custom(terms, sense.unwrap_or(Sense::Minimize)))
    }

    fn check_cost_parameters(&mut self, spec: &ObjectiveSpec, cost: &CostConfig, path: &str) {
        let needs_rate = spec.kind == ObjectiveKind::Annuity || spec.custom_terms.contains_key("annuity");
        if needs_rate && cost.interest_rate.is_none() {
            self.error(
                "costs.interest_rate",
                format!("required by the {} objective at `{path}`", spec.label()),
            );
        }
    }

    fn pareto(&mut self, v: &Value) -> Option<ParetoConfig> {
        let map = self.object(v, "pareto", &["objective", "points"])?;
        let objective = match map.get("objective") {
            Some(o) => self.objective(o, "pareto.objective"),
            None => {
                self.error("pareto.objective", "required field is missing");
                None
            }
        };
        let points = self.count(map, "points", "pareto").unwrap_or(DEFAULT_PARETO_POINTS);
        if points < 2 {
            self.error("pareto.points", "a front needs at least 2 points");
        }
        Some(ParetoConfig {
            objective: objective?,
            points,
        })
    }

    fn costs(&mut self, v: &Value) -> CostConfig {
        let Some(map) = self.object(v, "costs", &["interest_rate", "import_price", "export_remuneration", "co2_factor"]) else {
            return CostConfig::default();
        };
        let interest_rate = self.number(map, "interest_rate", "costs");
        if let Some(r) = interest_rate.filter(|r| *r <= 0.0) {
            self.error("costs.interest_rate", format!("{r} must be positive"));
        }
        let price = |s: &mut Self, v: &Value, p: &str| match v {
            Value::String(name) => Some(PriceRef::Profile(name.clone())),
            _ => match v.as_f64() {
                Some(x) if x.is_finite() && x >= 0.0 => Some(PriceRef::Scalar(x)),
                _ => {
                    s.error(p, "expected a non-negative number or a profile name");
                    None
                }
            },
        };
        let import_price = self.per_carrier(map, "import_price", "costs", price);
        let export_remuneration = self.per_carrier(map, "export_remuneration", "costs", price);
        let co2_factor = self.per_carrier(map, "co2_factor", "costs", |s, v, p| match v.as_f64() {
            Some(x) if x.is_finite() && x >= 0.0 => Some(x),
            _ => {
                s.error(p, "expected a non-negative number");
                None
            }
        });
        CostConfig {
            interest_rate: interest_rate.filter(|r| *r > 0.0),
            import_price,
            export_remuneration,
            co2_factor,
        }
    }

    fn aggregation(&mut self, v: &Value) -> Option<AggregationConfig> {
        let map = self.object(v, "aggregation", &["period_length", "k"])?;
        let period_length = self.count(map, "period_length", "aggregation");
        let k = self.count(map, "k", "aggregation");
        if !map.contains_key("period_length") {
            self.error("aggregation.period_length", "required field is missing");
        }
        if !map.contains_key("k") {
            self.error("aggregation.k", "required field is missing");
        }
        Some(AggregationConfig {
            period_length: period_length?,
            k: k?,
        })
    }

    fn solver(&mut self, v: Option<&Value>) -> MilpOptions {
        let mut options = MilpOptions {
            rel_gap: DEFAULT_REL_GAP,
            ..MilpOptions::default()
        };
        let Some(map) = v.and_then(|v| self.object(v, "solver", &["rel_gap", "node_limit"])) else {
            return options;
        };
        if let Some(g) = self.non_negative(map, "rel_gap", "solver") {
            options.rel_gap = g;
        }
        if let Some(n) = self.count(map, "node_limit", "solver") {
            options.node_limit = n;
        }
        options
    }

    fn prosumer(&mut self, v: &Value, path: &str) -> Option<ProsumerTopology> {
        let map = self.object(v, path, &["name", "buses", "components", "links"])?;
        let name = self.string(map, "name", path, true)?;
        let mut topo = ProsumerTopology::new(&name);
        for (i, b) in self.array(map, "buses", path).iter().enumerate() {
            let p = format!("{path}.buses[{i}]");
            let Some(bm) = self.object(b, &p, &["name", "carrier"]) else { continue };
            let bus = self.string(bm, "name", &p, true);
            let carrier = self.carrier(bm, "carrier", &p, true);
            if let (Some(bus), Some(carrier)) = (bus, carrier) {
                topo = topo.with_bus(&bus, carrier);
            }
        }
        for (i, c) in self.array(map, "components", path).iter().enumerate() {
            if let Some(spec) = self.component(c, &format!("{path}.components[{i}]")) {
                topo = topo.with_component(spec);
            }
        }
        for (i, l) in self.array(map, "links", path).iter().enumerate() {
            let p = format!("{path}.links[{i}]");
            let Some(lm) = self.object(l, &p, &["from", "to", "bidirectional"]) else { continue };
            let from = self.string(lm, "from", &p, true);
            let to = self.string(lm, "to", &p, true);
            let bidirectional = self.boolean(lm, "bidirectional", &p).unwrap_or(false);
            if let (Some(from), Some(to)) = (from, to) {
                topo = if bidirectional {
                    topo.with_undirected_link(&from, &to)
                } else {
                    topo.with_link(&from, &to)
                };
            }
        }
        for violation in validate_topology(&topo) {
            self.error(path, violation.to_string());
        }
        Some(topo)
    }

    fn component(&mut self, v: &Value, path: &str) -> Option<ComponentSpec> {
        const FIELDS: [&str; 22] = [
            "name",
            "type",
            "carrier",
            "from",
            "to",
            "ratio",
            "capacity",
            "max_capacity",
            "mode",
            "efficiency",
            "charge_efficiency",
            "discharge_efficiency",
            "c_rate",
            "power_limit",
            "exclusive_charging",
            "curtailable",
            "capex",
            "opex",
            "co2",
            "lifetime",
            "profile",
            "bidirectional",
        ];
        let map = self.object(v, path, &FIELDS)?;
        let name = self.string(map, "name", path, true);
        let type_name = self.string(map, "type", path, true);
        let archetype = type_name.as_deref().and_then(|t| {
            let a = if t.eq_ignore_ascii_case("grid") {
                Some(Archetype::GridConnection)
            } else {
                Archetype::parse(t)
            };
            if a.is_none() {
                self.error(
                    at(path, "type"),
                    format!("`{t}` is not one of generator, demand, storage, converter, grid"),
                );
            }
            a
        });
        let (name, archetype) = (name?, archetype?);
        let mut spec = if archetype == Archetype::Converter {
            let from = self.carrier(map, "from", path, true);
            let to = self.carrier(map, "to", path, true);
            let ratio = self.number(map, "ratio", path);
            if map.contains_key("carrier") {
                self.error(at(path, "carrier"), "converters take `from` and `to` instead");
            }
            let mut spec = ComponentSpec::converter(&name, from?, to?, 1.0);
            spec.conversion_ratio = ratio;
            spec
        } else {
            for key in ["from", "to", "ratio"] {
                if map.contains_key(key) {
                    self.error(at(path, key), "only converters take this field");
                }
            }
            let carrier = self.carrier(map, "carrier", path, true)?;
            match archetype {
                Archetype::Generator => ComponentSpec::generator(&name, carrier),
                Archetype::Demand => ComponentSpec::demand(&name, carrier, ""),
                Archetype::Storage => ComponentSpec::storage(&name, carrier),
                _ => ComponentSpec::grid(&name, carrier),
            }
        };
        spec.profile = self.string(map, "profile", path, false);
        spec.capacity = self.non_negative(map, "capacity", path);
        spec.max_capacity = self.non_negative(map, "max_capacity", path);
        spec.mode = match self.string(map, "mode", path, false).as_deref() {
            None => None,
            Some(m) if m.eq_ignore_ascii_case("sizing") => Some(Mode::Sizing),
            Some(m) if m.eq_ignore_ascii_case("operation") => Some(Mode::Operation),
            Some(m) => {
                self.error(at(path, "mode"), format!("`{m}` is not sizing or operation"));
                None
            }
        };
        let numbers: [(&str, &mut f64); 7] = [
            ("efficiency", &mut spec.efficiency),
            ("charge_efficiency", &mut spec.charge_efficiency),
            ("discharge_efficiency", &mut spec.discharge_efficiency),
            ("c_rate", &mut spec.c_rate),
            ("capex", &mut spec.capex_per_unit),
            ("opex", &mut spec.opex_per_unit_energy),
            ("co2", &mut spec.co2_per_unit_energy),
        ];
        for (key, slot) in numbers {
            if let Some(x) = self.number(map, key, path) {
                *slot = x;
            }
        }
        spec.power_limit = self.number(map, "power_limit", path);
        if let Some(n) = self.count(map, "lifetime", path) {
            spec.lifetime_years = n as u32;
        }
        if let Some(b) = self.boolean(map, "exclusive_charging", path) {
            spec.exclusive_charging = b;
        }
        if let Some(b) = self.boolean(map, "curtailable", path) {
            spec.curtailable = b;
        }
        if let Some(b) = self.boolean(map, "bidirectional", path) {
            spec.bidirectional = b;
        }
        Some(spec)
    }

    fn standalone_component(&mut self, v: &Value, path: &str) -> Option<ComponentSpec> {
        let spec = self.component(v, path)?;
        for problem in spec.validate() {
            self.error(path, problem);
        }
        Some(spec)
    }

    fn district(&mut self, v: &Value, path: &str, prosumers: &[ProsumerTopology]) -> Option<DistrictConfig> {
        let map = self.object(
            v,
            path,
            &[
                "name",
                "members",
                "central",
                "shared_grids",
                "peak_import_limit",
                "flexibility",
                "monolithic_reference",
            ],
        )?;
        let name = self.string(map, "name", path, true);
        let mut members = Vec::new();
        for (i, m) in self.array(map, "members", path).iter().enumerate() {
            let p = format!("{path}.members[{i}]");
            match m.as_str() {
                None => self.error(p, "expected a prosumer name"),
                Some(n) => match prosumers.iter().find(|t| t.name == n) {
                    Some(t) if members.iter().any(|x: &ProsumerTopology| x.name == n) => {
                        self.error(p, format!("prosumer `{}` is listed twice", t.name))
                    }
                    Some(t) => members.push(t.clone()),
                    None => self.error(p, format!("unknown prosumer `{n}`")),
                },
            }
        }
        if members.is_empty() {
            self.error(at(path, "members"), "a district needs at least one member");
        }
        let central: Vec<ComponentSpec> = self
            .array(map, "central", path)
            .iter()
            .enumerate()
            .filter_map(|(i, c)| self.standalone_component(c, &format!("{path}.central[{i}]")))
            .collect();
        let shared_grids: Vec<ComponentSpec> = match map.get("shared_grids") {
            Some(_) => self
                .array(map, "shared_grids", path)
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let p = format!("{path}.shared_grids[{i}]");
                    let spec = self.standalone_component(c, &p)?;
                    if spec.archetype != Archetype::GridConnection {
                        self.error(p, "shared grids must be of type grid");
                        return None;
                    }
                    Some(spec)
                })
                .collect(),
            None => default_shared_grids(&members),
        };
        let mut names = BTreeSet::new();
        for c in central.iter().chain(&shared_grids) {
            if !names.insert(c.name.as_str()) {
                self.error(path, format!("district component `{}` is defined twice", c.name));
            }
        }
        let band = |s: &mut Self, v: &Value, p: &str| match v.as_f64() {
            Some(x) if x.is_finite() && x >= 0.0 => Some(x),
            _ => {
                s.error(p, "expected a non-negative number");
                None
            }
        };
        let peak_import_limit = self.per_carrier(map, "peak_import_limit", path, band);
        let flexibility = self.per_carrier(map, "flexibility", path, band);
        let monolithic_reference = self.boolean(map, "monolithic_reference", path).unwrap_or(false);
        Some(DistrictConfig {
            spec: DistrictSpec {
                name: name?,
                members,
                central,
                shared_grids,
                peak_import_limit,
            },
            flexibility,
            monolithic_reference,
        })
    }

    fn city(&mut self, v: &Value, districts: &[DistrictConfig]) -> Option<CityConfig> {
        let map = self.object(v, "city", &["links", "plants"])?;
        let known = |n: &str| districts.iter().any(|d| d.spec.name == n);
        let mut links = Vec::new();
        for (i, l) in self.array(map, "links", "city").iter().enumerate() {
            let p = format!("city.links[{i}]");
            let Some(lm) = self.object(l, &p, &["from", "to", "carrier", "capacity"]) else { continue };
            let from = self.string(lm, "from", &p, true);
            let to = self.string(lm, "to", &p, true);
            let carrier = self.carrier(lm, "carrier", &p, true);
            let capacity = self.non_negative(lm, "capacity", &p);
            if !lm.contains_key("capacity") {
                self.error(at(&p, "capacity"), "required field is missing");
            }
            for (key, n) in [("from", &from), ("to", &to)] {
                if let Some(n) = n.as_deref().filter(|n| !known(n)) {
                    self.error(at(&p, key), format!("unknown district `{n}`"));
                }
            }
            if let (Some(from), Some(to), Some(carrier), Some(capacity)) = (from, to, carrier, capacity) {
                links.push(TransferLink {
                    from,
                    to,
                    carrier,
                    capacity,
                });
            }
        }
        let mut plants = Vec::new();
        for (i, pl) in self.array(map, "plants", "city").iter().enumerate() {
            let p = format!("city.plants[{i}]");
            let Some(pm) = self.object(pl, &p, &["node", "component"]) else { continue };
            let node = self.string(pm, "node", &p, true);
            if let Some(n) = node.as_deref().filter(|n| !known(n)) {
                self.error(at(&p, "node"), format!("unknown district `{n}`"));
            }
            let spec = match pm.get("component") {
                Some(c) => self.standalone_component(c, &at(&p, "component")),
                None => {
                    self.error(at(&p, "component"), "required field is missing");
                    None
                }
            };
            if let (Some(node), Some(spec)) = (node, spec) {
                plants.push(CentralPlant { node, spec });
            }
        }
        Some(CityConfig { links, plants })
    }
}

/// One unlimited, bidirectional shared grid per carrier that any member
/// exchanges with its grid connections.
pub fn default_shared_grids(members: &[ProsumerTopology]) -> Vec<ComponentSpec> {
    let carriers: BTreeSet<Carrier> = members.iter().flat_map(|m| m.grid_carriers()).collect();
    carriers
        .into_iter()
        .map(|c| ComponentSpec::grid(&format!("grid_{c}"), c).bidirectional(true))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "m",
        "level": "prosumer",
        "horizon": {"steps": 2, "start": "2024-01-01T00:00:00"},
        "objective": {"kind": "OperatingCost"},
        "prosumers": [{
            "name": "h",
            "buses": [{"name": "el", "carrier": "electricity"}],
            "components": [
                {"name": "grid", "type": "grid", "carrier": "electricity"},
                {"name": "load", "type": "demand", "carrier": "electricity", "profile": "load"}
            ],
            "links": [{"from": "grid", "to": "el"}, {"from": "el", "to": "load"}]
        }]
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let doc = parse_document(MINIMAL).unwrap();
        assert_eq!(doc.level, Level::Prosumer);
        assert_eq!(doc.horizon.dt_hours, 1.0);
        assert_eq!(doc.aggregation, None);
        assert_eq!(doc.options.rel_gap, 1e-6);
        assert_eq!(doc.prosumers[0].components.len(), 2);
    }

    #[test]
    fn malformed_json_reports_position() {
        let e = parse_document("{\n  \"name\": \n}").unwrap_err();
        assert!(matches!(e, ScenarioError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn annuity_without_interest_rate_names_the_field() {
        let text = MINIMAL.replace("OperatingCost", "Annuity");
        let ScenarioError::Schema { errors, .. } = parse_document(&text).unwrap_err() else {
            panic!("expected a schema error")
        };
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].path, "costs.interest_rate");
    }

    #[test]
    fn all_violations_are_collected() {
        let text = MINIMAL
            .replace("\"prosumer\"", "\"galaxy\"")
            .replace("\"electricity\"}]", "\"plasma\"}]")
            .replace("\"type\": \"grid\"", "\"type\": \"grid\", \"capacity\": -1");
        let ScenarioError::Schema { errors, .. } = parse_document(&text).unwrap_err() else {
            panic!("expected a schema error")
        };
        let paths: Vec<&str> = errors.iter().map(|e| e.path.as_str()).collect();
        assert!(paths.contains(&"level"), "{paths:?}");
        assert!(paths.contains(&"prosumers[0].buses[0].carrier"), "{paths:?}");
        assert!(paths.contains(&"prosumers[0].components[0].capacity"), "{paths:?}");
    }

    #[test]
    fn unreachable_demand_is_reported() {
        let text = MINIMAL.replace(r#"{"from": "grid", "to": "el"}, "#, "").replace(
            r#"{"name": "grid", "type": "grid", "carrier": "electricity"},"#,
            "",
        );
        let e = parse_document(&text).unwrap_err().to_string();
        assert!(e.contains("demand `load`"), "{e}");
    }

    #[test]
    fn missing_profile_file_is_reported_with_its_path() {
        let text = MINIMAL.replace("\"objective\"", "\"profiles\": \"absent.csv\", \"objective\"");
        let doc = parse_document(&text).unwrap();
        let e = resolve(doc, Path::new("/nowhere"), "s.json").unwrap_err();
        assert_eq!(
            e,
            ScenarioError::MissingFile {
                path: PathBuf::from("/nowhere/absent.csv")
            }
        );
    }

    #[test]
    fn district_members_must_exist() {
        let text = MINIMAL.replace("\"prosumer\"", "\"district\"").replace(
            "\"prosumers\"",
            r#""districts": [{"name": "d", "members": ["h", "ghost"]}], "prosumers""#,
        );
        let ScenarioError::Schema { errors, .. } = parse_document(&text).unwrap_err() else {
            panic!("expected a schema error")
        };
        assert_eq!(errors.len(), 1, "{errors:?}");
        assert_eq!(errors[0].path, "districts[0].members[1]");
    }

    #[test]
    fn default_shared_grid_per_member_carrier() {
        let doc = parse_document(&MINIMAL.replace("\"prosumer\"", "\"district\"").replace(
            "\"prosumers\"",
            r#""districts": [{"name": "d", "members": ["h"]}], "prosumers""#,
        ))
        .unwrap();
        let grids = &doc.districts[0].spec.shared_grids;
        assert_eq!(grids.len(), 1);
        assert_eq!(grids[0].name, "grid_electricity");
        assert!(grids[0].bidirectional);
    }
}
