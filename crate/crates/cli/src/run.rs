//! Executes a scenario's pipeline and gathers everything that gets written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use strata::aggregation::{aggregate_series, TypicalPeriodSet};
use strata::hierarchy::{
    city_model, district_model, monolithic_reference, optimize_city, optimize_district, optimize_prosumer,
    prosumer_model, CityDistrict, CityModel, DistrictModel, DistrictResult, MonolithicInput, ProsumerResult,
    RunSettings,
};
use strata::model::SolveStats;
use strata::pareto::generate_pareto_front;
use strata::{CostParameters, EnergyModel, Error, Horizon, Mode, PriceSeries, Profiles};
use strata_milp::write_lp;
use thiserror::Error;

use crate::profiles::TIMESTAMP_OUTPUT;
use crate::scenario::{DistrictConfig, Level, PriceRef, ScenarioConfig, ScenarioDocument, ScenarioError};

/// Largest balance or storage residual a reported solution may have.
pub const RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{trail}: {source}")]
    Model {
        trail: String,
        #[source]
        source: Error,
    },
    #[error("{entity}: solution fails the balance check (balance residual {balance:e}, storage residual {storage:e})")]
    Verification { entity: String, balance: f64, storage: f64 },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl RunError {
    /// Process exit code: 2 invalid input, 3 no usable solution, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(ScenarioError::Io { .. }) | RunError::Io { .. } => 4,
            RunError::Scenario(_) => 2,
            RunError::Model { source, .. } => match source {
                Error::Infeasible { .. } | Error::Unbounded { .. } | Error::Solve { .. } => 3,
                _ => 2,
            },
            RunError::Verification { .. } => 3,
        }
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Directory receiving the LP file of every model solved.
    pub lp_export: Option<PathBuf>,
    /// Progress messages on stderr.
    pub verbose: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntitySummary {
    /// `L1`, `L2` or `L3`.
    pub level: &'static str,
    pub name: String,
    pub objective: f64,
    pub capacities: BTreeMap<String, f64>,
    pub stats: SolveStats,
    /// Objective of the jointly solved district, when requested.
    pub monolithic_objective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoRow {
    pub entity: String,
    pub objective_a: f64,
    pub objective_b: f64,
    /// Capacities sized at this point, keyed by component path.
    pub capacities: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub scenario: String,
    pub level: Level,
    pub objective: String,
    pub dt_hours: f64,
    pub timestamps: Vec<String>,
    pub entities: Vec<EntitySummary>,
    /// Full-horizon series keyed `{level}/{entity path}/{quantity}`.
    pub dispatch: BTreeMap<String, Vec<f64>>,
    /// Full-horizon import − export keyed `{level}/{entity}/{carrier}`.
    pub residual_load: BTreeMap<String, Vec<f64>>,
    pub pareto_objective: Option<String>,
    pub pareto: Vec<ParetoRow>,
    pub aggregation: Option<TypicalPeriodSet>,
    /// Not written to any file.
    pub wall_time: Duration,
}

/// Inputs shared by every level once aggregation has been applied.
struct Prepared {
    horizon: Horizon,
    profiles: Profiles,
    settings: RunSettings,
    aggregation: Option<TypicalPeriodSet>,
}

fn prepare(config: &ScenarioConfig) -> Result<Prepared, RunError> {
    let doc = &config.document;
    let (horizon, profiles, aggregation) = match doc.aggregation {
        Some(a) => {
            let (set, profiles) = aggregate_series(&config.profiles, a.period_length, a.k).map_err(|e| RunError::Model {
                trail: "aggregation".into(),
                source: e.into(),
            })?;
            (set.horizon(doc.horizon.dt_hours), profiles, Some(set))
        }
        None => (
            Horizon::new(config.steps(), doc.horizon.dt_hours),
            config.profiles.clone(),
            None,
        ),
    };
    let price = |p: &PriceRef| match p {
        PriceRef::Scalar(v) => PriceSeries::Scalar(*v),
        PriceRef::Profile(name) => PriceSeries::Series(profiles[name].clone()),
    };
    let cost = CostParameters {
        interest_rate: doc.cost.interest_rate,
        import_price: doc.cost.import_price.iter().map(|(c, p)| (*c, price(p))).collect(),
        export_remuneration: doc.cost.export_remuneration.iter().map(|(c, p)| (*c, price(p))).collect(),
        co2_factor: doc.cost.co2_factor.clone(),
    };
    Ok(Prepared {
        horizon,
        profiles,
        settings: RunSettings {
            objective: doc.objective.clone(),
            cost,
            options: doc.options,
        },
        aggregation,
    })
}

fn trail(level: Level, entity: &str) -> impl Fn(Error) -> RunError + '_ {
    move |source| RunError::Model {
        trail: format!("level `{}` > {entity}", level.as_str()),
        source,
    }
}

fn verify(entity: &str, stats: &SolveStats) -> Result<(), RunError> {
    if stats.balance_residual <= RESIDUAL_TOL && stats.storage_residual <= RESIDUAL_TOL {
        Ok(())
    } else {
        Err(RunError::Verification {
            entity: entity.to_string(),
            balance: stats.balance_residual,
            storage: stats.storage_residual,
        })
    }
}

struct Runner<'a> {
    config: &'a ScenarioConfig,
    prepared: Prepared,
    options: &'a RunOptions,
    bundle: ResultBundle,
}

impl Runner<'_> {
    fn log(&self, message: &str) {
        if self.options.verbose {
            eprintln!("[{}] {message}", self.config.document.name);
        }
    }

    fn export(&self, file: &str, model: &EnergyModel) -> Result<(), RunError> {
        let Some(dir) = &self.options.lp_export else { return Ok(()) };
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let path = dir.join(format!("{file}.lp"));
        std::fs::write(&path, write_lp(&model.problem)).map_err(|e| io_error(&path, e))
    }

    fn series(&mut self, key: String, series: &[f64]) -> Result<(), RunError> {
        let full = match &self.prepared.aggregation {
            Some(set) => set.expand(series).map_err(|e| RunError::Model {
                trail: format!("expanding `{key}`"),
                source: e.into(),
            })?,
            None => series.to_vec(),
        };
        self.bundle.dispatch.insert(key, full);
        Ok(())
    }

    fn residual(&mut self, key: String, series: &[f64]) -> Result<(), RunError> {
        self.series(key.clone(), series)?;
        let full = self.bundle.dispatch.remove(&key).expect("just inserted");
        self.bundle.residual_load.insert(key, full);
        Ok(())
    }

    fn level1(&mut self) -> Result<Vec<ProsumerResult>, RunError> {
        let level = self.config.document.level;
        let prosumers = &self.config.document.prosumers;
        if self.options.lp_export.is_some() {
            for topo in prosumers {
                let Prepared {
                    horizon,
                    profiles,
                    settings,
                    ..
                } = &self.prepared;
                let model = prosumer_model(topo, horizon, Mode::Sizing, profiles, settings)
                    .map_err(trail(level, &format!("prosumer `{}`", topo.name)))?;
                self.export(&format!("L1_{}", topo.name), &model)?;
            }
        }
        for topo in prosumers {
            self.log(&format!("solving prosumer `{}`", topo.name));
        }
        // independent problems; results are collected in scenario order
        let solved: Vec<Result<ProsumerResult, Error>> = {
            let Prepared {
                horizon,
                profiles,
                settings,
                ..
            } = &self.prepared;
            std::thread::scope(|s| {
                let handles: Vec<_> = prosumers
                    .iter()
                    .map(|topo| s.spawn(move || optimize_prosumer(topo, horizon, Mode::Sizing, profiles, settings)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
                    .collect()
            })
        };
        let mut results = Vec::new();
        for (topo, r) in prosumers.iter().zip(solved) {
            let entity = format!("prosumer `{}`", topo.name);
            let r = r.map_err(trail(level, &entity))?;
            verify(&entity, &r.stats)?;
            for (key, s) in &r.dispatch {
                self.series(format!("L1/{key}"), s)?;
            }
            for (carrier, s) in &r.residual_load {
                self.residual(format!("L1/{}/{carrier}", r.name), s)?;
            }
            self.bundle.entities.push(EntitySummary {
                level: "L1",
                name: r.name.clone(),
                objective: r.objective,
                capacities: r.capacities.clone(),
                stats: r.stats.clone(),
                monolithic_objective: None,
            });
            results.push(r);
        }
        Ok(results)
    }

    fn level2(&mut self, level1: &[ProsumerResult]) -> Result<Vec<DistrictResult>, RunError> {
        let level = self.config.document.level;
        let mut results = Vec::new();
        for d in &self.config.document.districts {
            let entity = format!("district `{}`", d.spec.name);
            let dm = district(d, level1);
            let Prepared {
                horizon,
                profiles,
                settings,
                ..
            } = &self.prepared;
            if self.options.lp_export.is_some() {
                let model = district_model(&dm, horizon, profiles, settings).map_err(trail(level, &entity))?;
                self.export(&format!("L2_{}", d.spec.name), &model)?;
            }
            self.log(&format!("solving {entity}"));
            let r = optimize_district(&dm, horizon, profiles, settings).map_err(trail(level, &entity))?;
            verify(&entity, &r.stats)?;
            let monolithic_objective = if d.monolithic_reference {
                self.log(&format!("solving monolithic reference of {entity}"));
                let m = monolithic_reference(MonolithicInput::District(&d.spec), horizon, profiles, settings)
                    .map_err(trail(level, &entity))?;
                verify(&format!("monolithic reference of {entity}"), &m.stats)?;
                Some(m.objective)
            } else {
                None
            };
            for (key, s) in &r.dispatch {
                self.series(format!("L2/{key}"), s)?;
            }
            for (carrier, s) in &r.residual_load {
                self.residual(format!("L2/{}/{carrier}", r.name), s)?;
            }
            self.bundle.entities.push(EntitySummary {
                level: "L2",
                name: r.name.clone(),
                objective: r.objective,
                capacities: r.central_capacities.clone(),
                stats: r.stats.clone(),
                monolithic_objective,
            });
            results.push(r);
        }
        Ok(results)
    }

    fn level3(&mut self, city: &CityModel) -> Result<(), RunError> {
        let level = self.config.document.level;
        let Prepared {
            horizon,
            profiles,
            settings,
            ..
        } = &self.prepared;
        if self.options.lp_export.is_some() {
            let model = city_model(city, horizon, profiles, settings).map_err(trail(level, "city"))?;
            self.export("L3_city", &model)?;
        }
        self.log("solving city");
        let r = optimize_city(city, horizon, profiles, settings).map_err(trail(level, "city"))?;
        verify("city", &r.stats)?;
        for (key, s) in &r.dispatch {
            self.series(format!("L3/{key}"), s)?;
        }
        for (carrier, s) in &r.external_exchange {
            self.residual(format!("L3/city/{carrier}"), s)?;
        }
        self.bundle.entities.push(EntitySummary {
            level: "L3",
            name: "city".into(),
            objective: r.objective,
            capacities: r.plant_capacities,
            stats: r.stats,
            monolithic_objective: None,
        });
        Ok(())
    }

    /// Fronts of every top-level model.
    fn pareto(&mut self, models: Vec<(String, EnergyModel)>) -> Result<(), RunError> {
        let doc = &self.config.document;
        let Some(p) = &doc.pareto else { return Ok(()) };
        for (entity, model) in models {
            self.log(&format!("Pareto front of {entity}"));
            let front = generate_pareto_front(
                &model,
                &doc.objective,
                &p.objective,
                &self.prepared.settings.cost,
                p.points,
                &self.prepared.settings.options,
            )
            .map_err(trail(doc.level, &entity))?;
            for point in front {
                verify(&format!("Pareto point of {entity}"), &point.solution.stats)?;
                self.bundle.pareto.push(ParetoRow {
                    entity: entity.clone(),
                    objective_a: point.objective_a,
                    objective_b: point.objective_b,
                    capacities: model.sized_capacities(&point.solution.values),
                });
            }
        }
        Ok(())
    }
}

fn district(d: &DistrictConfig, level1: &[ProsumerResult]) -> DistrictModel {
    DistrictModel {
        spec: d.spec.clone(),
        level1: level1
            .iter()
            .filter(|r| d.spec.members.iter().any(|m| m.name == r.name))
            .cloned()
            .collect(),
    }
}

fn city(doc: &ScenarioDocument, level2: &[DistrictResult]) -> CityModel {
    let config = doc.city.clone().unwrap_or_default();
    CityModel {
        districts: level2
            .iter()
            .map(|r| {
                let mut d = CityDistrict::from_result(r);
                if let Some(cfg) = doc.districts.iter().find(|c| c.spec.name == r.name) {
                    d.flexibility = cfg.flexibility.clone();
                }
                d
            })
            .collect(),
        links: config.links,
        plants: config.plants,
    }
}

impl ResultBundle {
    fn empty(config: &ScenarioConfig) -> Self {
        let doc = &config.document;
        Self {
            scenario: doc.name.clone(),
            level: doc.level,
            objective: doc.objective.label().to_string(),
            dt_hours: doc.horizon.dt_hours,
            timestamps: config
                .timestamps
                .iter()
                .map(|t| t.format(TIMESTAMP_OUTPUT).to_string())
                .collect(),
            entities: Vec::new(),
            dispatch: BTreeMap::new(),
            residual_load: BTreeMap::new(),
            pareto_objective: doc.pareto.as_ref().map(|p| p.objective.label().to_string()),
            pareto: Vec::new(),
            aggregation: None,
            wall_time: Duration::ZERO,
        }
    }
}

/// Solves the levels below the configured one.
fn lower_levels(runner: &mut Runner<'_>) -> Result<(Vec<ProsumerResult>, Vec<DistrictResult>), RunError> {
    let level = runner.config.document.level;
    let level1 = runner.level1()?;
    let level2 = match level {
        Level::City => runner.level2(&level1)?,
        _ => Vec::new(),
    };
    Ok((level1, level2))
}

/// Runs the configured level's pipeline.
pub fn run_scenario(config: &ScenarioConfig, options: &RunOptions) -> Result<ResultBundle, RunError> {
    let started = Instant::now();
    let doc = &config.document;
    let prepared = prepare(config)?;
    let mut bundle = ResultBundle::empty(config);
    bundle.aggregation = prepared.aggregation.clone();
    let mut runner = Runner {
        config,
        prepared,
        options,
        bundle,
    };

    let (level1, level2) = lower_levels(&mut runner)?;
    match doc.level {
        Level::Prosumer => {}
        Level::District => {
            runner.level2(&level1)?;
        }
        Level::City => runner.level3(&city(doc, &level2))?,
    }
    if doc.pareto.is_some() {
        let models = top_level_models(doc, &runner.prepared, &level1, &level2)?;
        runner.pareto(models)?;
    }

    let mut bundle = runner.bundle;
    bundle.wall_time = started.elapsed();
    if options.verbose {
        eprintln!("[{}] finished in {:.3} s", doc.name, bundle.wall_time.as_secs_f64());
    }
    Ok(bundle)
}

/// Models of the configured level, built from the lower levels' results.
fn top_level_models(
    doc: &ScenarioDocument,
    prepared: &Prepared,
    level1: &[ProsumerResult],
    level2: &[DistrictResult],
) -> Result<Vec<(String, EnergyModel)>, RunError> {
    let Prepared {
        horizon,
        profiles,
        settings,
        ..
    } = prepared;
    let mut out = Vec::new();
    match doc.level {
        Level::Prosumer => {
            for topo in &doc.prosumers {
                let entity = format!("prosumer `{}`", topo.name);
                let model = prosumer_model(topo, horizon, Mode::Sizing, profiles, settings).map_err(trail(doc.level, &entity))?;
                out.push((format!("L1/{}", topo.name), model));
            }
        }
        Level::District => {
            for d in &doc.districts {
                let entity = format!("district `{}`", d.spec.name);
                let model =
                    district_model(&district(d, level1), horizon, profiles, settings).map_err(trail(doc.level, &entity))?;
                out.push((format!("L2/{}", d.spec.name), model));
            }
        }
        Level::City => {
            let model = city_model(&city(doc, level2), horizon, profiles, settings).map_err(trail(doc.level, "city"))?;
            out.push(("L3/city".into(), model));
        }
    }
    Ok(out)
}

/// Writes the LP file of the configured level's model(s). A single model
/// goes to `out`; several go next to it as `{stem}.{entity}.lp`. Lower
/// levels are solved first where the top level depends on their results.
pub fn export_lp(config: &ScenarioConfig, out: &Path) -> Result<Vec<PathBuf>, RunError> {
    let doc = &config.document;
    let quiet = RunOptions::default();
    let mut runner = Runner {
        config,
        prepared: prepare(config)?,
        options: &quiet,
        bundle: ResultBundle::empty(config),
    };
    let (level1, level2) = match doc.level {
        Level::Prosumer => (Vec::new(), Vec::new()),
        _ => lower_levels(&mut runner)?,
    };
    let models = top_level_models(doc, &runner.prepared, &level1, &level2)?;
    if let [(_, model)] = models.as_slice() {
        write_file(out, &write_lp(&model.problem))?;
        return Ok(vec![out.to_path_buf()]);
    }
    let stem = out.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
    let mut written = Vec::new();
    for (entity, model) in &models {
        let name = entity.rsplit('/').next().unwrap_or(entity);
        let path = out.with_file_name(format!("{stem}.{name}.lp"));
        write_file(&path, &write_lp(&model.problem))?;
        written.push(path);
    }
    Ok(written)
}

pub(crate) fn write_file(path: &Path, content: &str) -> Result<(), RunError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, content).map_err(|e| io_error(path, e))
}
