//! Fitting and scoring every configured model for every seed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind, ModelSpec};
use super::dataset::Dataset;
use super::pipeline::Prepared;
use super::split::Part;
use crate::baselines::{har_fit, har_lags, HarObservation, HarParams, HarRow, MlpModel};
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphStats};
use crate::metrics::{rmspe, EPSILON};
use crate::model::{self, GraphInputs, GtnModel, TrainData, TrainLog};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model: String,
    pub seed: u64,
    pub val_rmspe: Option<f64>,
    pub test_rmspe: Option<f64>,
    /// Aligned with [`Prepared::val`].
    pub val_pred: Vec<f64>,
    /// Aligned with [`Prepared::test`].
    pub test_pred: Vec<f64>,
    pub train_log: Option<TrainLog>,
    pub graph_stats: Option<GraphStats>,
    pub gtn: Option<GtnModel>,
}

impl ModelRun {
    pub fn predictions(&self, part: Part) -> &[f64] {
        match part {
            Part::Val => &self.val_pred,
            Part::Test => &self.test_pred,
            Part::Train => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub model: String,
    pub seed: u64,
    pub error: String,
    /// CLI exit code the error maps to.
    pub exit_code: i32,
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        crate::ErrorKind::Config => 2,
        crate::ErrorKind::Data => 3,
        crate::ErrorKind::Numerical => 4,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub prepared: Prepared,
    pub runs: Vec<ModelRun>,
    pub failures: Vec<Failure>,
}

fn score(pred: &[f64], nodes: &[u32], targets: &[f64]) -> Result<Option<f64>> {
    if nodes.is_empty() {
        return Ok(None);
    }
    let t: Vec<f64> = nodes.iter().map(|&v| targets[v as usize]).collect();
    rmspe(pred, &t, EPSILON).map(Some)
}

fn mean_target(prep: &Prepared) -> f64 {
    let s: f64 = prep.train.iter().map(|&v| prep.targets[v as usize]).sum();
    let m = s / prep.train.len() as f64;
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

fn har_predictions(ds: &Dataset, prep: &Prepared, per_stock: bool) -> Result<BTreeMap<u32, f64>> {
    let obs: Vec<HarObservation> = ds
        .records
        .iter()
        .map(|r| HarObservation {
            symbol: r.feature.symbol.0,
            day: ds.day_index(r.feature.date).expect("record date in dataset"),
            backward_rv: r.backward_rv,
            target: r.feature.target,
        })
        .collect();
    let lags = har_lags(&obs);
    let train_days = ds.day_index(prep.split.boundaries.val_start).unwrap_or(ds.dates.len());
    let n = ds.universe.len();
    let mut rows: Vec<Vec<HarRow>> = vec![Vec::new(); if per_stock { n } else { 1 }];
    for (o, l) in obs.iter().zip(&lags) {
        if let (true, Some(l)) = (o.day < train_days, l) {
            let g = if per_stock { o.symbol as usize } else { 0 };
            rows[g].push(HarRow { lags: *l, y: o.target });
        }
    }
    let params: Vec<Option<HarParams>> = rows
        .iter()
        .map(|r| if r.is_empty() { Ok(None) } else { har_fit(r) })
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for ((o, l), &node) in obs.iter().zip(&lags).zip(&prep.record_nodes) {
        let g = if per_stock { o.symbol as usize } else { 0 };
        out.insert(node, HarParams::predict_or(params[g].as_ref(), l.as_ref(), o.backward_rv));
    }
    Ok(out)
}

/// Fits one model with one seed and scores it on validation and test.
pub fn run_model(
    ds: &Dataset,
    prep: &Prepared,
    cfg: &ExperimentConfig,
    spec: &ModelSpec,
    seed: u64,
) -> Result<ModelRun> {
    let mut run = ModelRun {
        model: spec.name.clone(),
        seed,
        val_rmspe: None,
        test_rmspe: None,
        val_pred: Vec::new(),
        test_pred: Vec::new(),
        train_log: None,
        graph_stats: None,
        gtn: None,
    };
    let data = TrainData {
        train: &prep.train,
        val: &prep.val,
        targets: &prep.targets,
    };
    match spec.kind {
        ModelKind::Naive => {
            run.val_pred = prep.val.iter().map(|&v| prep.naive[v as usize]).collect();
            run.test_pred = prep.test.iter().map(|&v| prep.naive[v as usize]).collect();
        }
        ModelKind::Har => {
            let p = har_predictions(ds, prep, cfg.har.per_stock)?;
            run.val_pred = prep.val.iter().map(|v| p[v]).collect();
            run.test_pred = prep.test.iter().map(|v| p[v]).collect();
        }
        ModelKind::Mlp => {
            let mut mcfg = cfg.mlp.clone();
            mcfg.train.seed = seed;
            let mut m = MlpModel::new(mcfg, prep.features.ncols(), mean_target(prep))?;
            run.train_log = Some(model::fit(&mut m, &prep.features, &data)?);
            run.val_pred = model::predict(&m, &prep.features, &prep.val)?;
            run.test_pred = model::predict(&m, &prep.features, &prep.test)?;
        }
        ModelKind::Gtn => {
            let (graph, stats) = prep.graph_for(&spec.relations);
            return gtn_run(prep, cfg, &spec.name, graph, stats, seed);
        }
    }
    run.val_rmspe = score(&run.val_pred, &prep.val, &prep.targets)?;
    run.test_rmspe = score(&run.test_pred, &prep.test, &prep.targets)?;
    Ok(run)
}

/// Trains a GTN on a given graph and scores it.
pub fn gtn_run(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    name: &str,
    graph: Graph,
    stats: GraphStats,
    seed: u64,
) -> Result<ModelRun> {
    let inputs = GraphInputs {
        graph,
        features: prep.features.clone(),
        symbols: prep.symbols.clone(),
    };
    let data = TrainData {
        train: &prep.train,
        val: &prep.val,
        targets: &prep.targets,
    };
    let mut gcfg = cfg.gtn.clone();
    gcfg.train.seed = seed;
    let mut m = GtnModel::new(gcfg, prep.space.n_symbols(), prep.features.ncols(), mean_target(prep))?;
    let log = model::fit(&mut m, &inputs, &data)?;
    let val_pred = model::predict(&m, &inputs, &prep.val)?;
    let test_pred = model::predict(&m, &inputs, &prep.test)?;
    Ok(ModelRun {
        model: name.to_string(),
        seed,
        val_rmspe: score(&val_pred, &prep.val, &prep.targets)?,
        test_rmspe: score(&test_pred, &prep.test, &prep.targets)?,
        val_pred,
        test_pred,
        train_log: Some(log),
        graph_stats: Some(stats),
        gtn: Some(m),
    })
}

/// Runs every model for every seed. A failing model is recorded and skipped.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut prep = Prepared::new(ds, cfg)?;
    for spec in &cfg.models {
        match spec.kind {
            ModelKind::Naive => {}
            ModelKind::Har | ModelKind::Mlp => prep.audit_fit(ds, &spec.name, None),
            ModelKind::Gtn => {
                let (g, _) = prep.graph_for(&spec.relations);
                prep.audit_fit(ds, &spec.name, Some((&g, cfg.gtn.layers)));
            }
        }
    }
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for &seed in &cfg.seeds {
        for spec in &cfg.models {
            let started = std::time::Instant::now();
            match run_model(ds, &prep, cfg, spec, seed) {
                Ok(r) => {
                    log::info!(
                        "{} seed {seed}: val {:?} test {:?} ({:.1}s)",
                        spec.name,
                        r.val_rmspe,
                        r.test_rmspe,
                        started.elapsed().as_secs_f64()
                    );
                    runs.push(r);
                }
                Err(e) => {
                    log::error!("{} seed {seed} failed: {e}", spec.name);
                    failures.push(Failure {
                        model: spec.name.clone(),
                        seed,
                        error: e.to_string(),
                        exit_code: exit_code(&e),
                    });
                }
            }
        }
    }
    Ok(ExperimentResult {
        config_hash: cfg.hash(),
        prepared: prep,
        runs,
        failures,
    })
}

/// One row of the prediction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub model: String,
    pub seed: u64,
    pub split: Part,
    pub symbol_id: u32,
    pub date: chrono::NaiveDate,
    pub anchor: u32,
    pub prediction: f64,
    pub target: f64,
}

impl ExperimentResult {
    pub fn run(&self, model: &str, seed: u64) -> Option<&ModelRun> {
        self.runs.iter().find(|r| r.model == model && r.seed == seed)
    }

    pub fn prediction_records(&self) -> Vec<PredictionRecord> {
        let prep = &self.prepared;
        let mut out = Vec::new();
        for r in &self.runs {
            for part in [Part::Val, Part::Test] {
                let nodes = if part == Part::Val { &prep.val } else { &prep.test };
                for (&v, &p) in nodes.iter().zip(r.predictions(part)) {
                    let id = prep.space.id(v as usize);
                    let (date, anchor) = prep.space.times()[id.time as usize];
                    out.push(PredictionRecord {
                        model: r.model.clone(),
                        seed: r.seed,
                        split: part,
                        symbol_id: id.symbol,
                        date,
                        anchor,
                        prediction: p,
                        target: prep.targets[v as usize],
                    });
                }
            }
        }
        out
    }
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|x| x.map_err(|e| Error::csv(path, e))).collect()
}
