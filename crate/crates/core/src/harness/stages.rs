//! Pipeline stages behind the CLI subcommands, all rooted at a run directory.
//!
//! ```text
//! run/
//!   manifest.json            one record per completed stage
//!   raw/                     generate: raw events, membership.csv, supply_chain.csv
//!   sampled/                 sample: one-second rows
//!   encoded/                 encode: feature table and bucket index
//!   graph/                   build-graph: edges.csv, graph_stats.json, audit.json
//!   predictions.csv          train: one row per model, seed and evaluated bucket
//!   checkpoints/             train: one GTN checkpoint per model and seed
//!   train_logs.json, failures.json, audit.json
//!   metrics.csv, summary.csv, summary.md          evaluate
//!   reports/liquidity_<seed>.{csv,svg}, reports/degree_<seed>.{csv,svg}   report
//!   sector_sweep.csv         sweep
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelKind};
use super::dataset::Dataset;
use super::experiment::{read_predictions, run_experiment, write_predictions, ExperimentResult, VERSION};
use super::pipeline::Prepared;
use super::report::{
    degree_report, liquidity_report, metric_rows, render_metrics, render_summary, summary_markdown, summary_rows,
    ReportHeader,
};
use super::sweep::{render_sweep, sector_sweep};
use super::synth::{stock_day_events, Latent};
use crate::error::{Error, Result};
use crate::graph::io::{read_membership, read_supply_chain, write_edges, write_membership, write_supply_chain};
use crate::graph::relations::resolve_pairs;
use crate::lob::io as lob_io;
use crate::lob::{sample_quotes, sample_trades, QuoteRow, SampleStats, TradeRow};
use crate::model::Checkpoint;

pub const MEMBERSHIP_FILE: &str = "membership.csv";
pub const SUPPLY_FILE: &str = "supply_chain.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub details: serde_json::Value,
}

/// Per-stage records of a run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn load(run: &Path) -> Result<Self> {
        let path = run.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    fn record(run: &Path, stage: &str, cfg: &ExperimentConfig, outputs: Vec<PathBuf>, details: serde_json::Value) -> Result<()> {
        let mut m = Self::load(run)?;
        m.stages.insert(
            stage.to_string(),
            StageRecord {
                config_hash: cfg.hash(),
                seeds: cfg.seeds.clone(),
                version: VERSION.to_string(),
                outputs,
                details,
            },
        );
        write_json(&run.join(MANIFEST_FILE), &m)
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn copy_if_exists(from: &Path, to: &Path) -> Result<()> {
    if from.exists() && from != to {
        std::fs::copy(from, to).map_err(|e| Error::io(from, e))?;
    }
    Ok(())
}

/// Writes raw quote and trade events of the synthetic market, plus its
/// sector membership and supply-chain pairs, under `run/raw`.
pub fn generate(cfg: &ExperimentConfig, run: &Path) -> Result<PathBuf> {
    let spec = &cfg.data.synthetic;
    let format = cfg.data.format()?;
    let latent = Latent::new(spec)?;
    let universe = spec.universe();
    let dir = run.join("raw");
    mkdir(&dir)?;
    let (mut n_quotes, mut n_trades) = (0usize, 0usize);
    for (d, date) in spec.trading_days().into_iter().enumerate() {
        let mut quotes = Vec::with_capacity(spec.n_stocks);
        let mut trades = Vec::with_capacity(spec.n_stocks);
        for s in 0..spec.n_stocks {
            let (q, t) = stock_day_events(spec, &latent, s, d);
            n_quotes += q.len();
            n_trades += t.len();
            quotes.push(q);
            trades.push(t);
        }
        let names = universe.symbols();
        lob_io::write_raw_quotes(
            &dir.join(lob_io::raw_quotes_file(date)),
            format,
            date,
            names.iter().map(String::as_str).zip(quotes.iter().map(Vec::as_slice)),
        )?;
        lob_io::write_raw_trades(
            &dir.join(lob_io::raw_trades_file(date)),
            format,
            date,
            names.iter().map(String::as_str).zip(trades.iter().map(Vec::as_slice)),
        )?;
    }
    write_membership(&dir.join(MEMBERSHIP_FILE), format, &spec.membership())?;
    write_supply_chain(&dir.join(SUPPLY_FILE), format, &latent.pair_names(&universe))?;
    log::info!("generated {n_quotes} quotes and {n_trades} trades in {}", dir.display());
    RunManifest::record(
        run,
        "generate",
        cfg,
        vec![dir.clone()],
        serde_json::json!({ "spec": spec, "quotes": n_quotes, "trades": n_trades }),
    )?;
    Ok(dir)
}

fn dated_files(dir: &Path, prefix: &str) -> Result<Vec<chrono::NaiveDate>> {
    let mut dates = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(d) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(".csv")) {
            if let Ok(date) = chrono::NaiveDate::parse_from_str(d, "%Y-%m-%d") {
                dates.push(date);
            }
        }
    }
    dates.sort_unstable();
    if dates.is_empty() {
        return Err(Error::Data(format!("no {prefix}*.csv files in {}", dir.display())));
    }
    Ok(dates)
}

/// Samples raw events to one-second rows, `raw` defaulting to `run/raw`.
pub fn sample(cfg: &ExperimentConfig, run: &Path) -> Result<PathBuf> {
    let format = cfg.data.format()?;
    let raw = cfg.data.raw_dir.clone().unwrap_or_else(|| run.join("raw"));
    let out = run.join("sampled");
    mkdir(&out)?;
    let mut stats = SampleStats::default();
    for date in dated_files(&raw, "quotes_raw_")? {
        let q = lob_io::read_raw_quotes(&raw.join(lob_io::raw_quotes_file(date)), format)?;
        let t = lob_io::read_raw_trades(&raw.join(lob_io::raw_trades_file(date)), format)?;
        let mut qrows: BTreeMap<&str, Vec<QuoteRow>> = BTreeMap::new();
        let mut trows: BTreeMap<&str, Vec<TradeRow>> = BTreeMap::new();
        for (sym, evs) in &q.by_symbol {
            let (rows, st) = sample_quotes(evs)?;
            stats.merge(&st);
            qrows.insert(sym, rows);
        }
        for (sym, evs) in &t.by_symbol {
            let (rows, st) = sample_trades(evs)?;
            stats.merge(&st);
            trows.insert(sym, rows);
        }
        lob_io::write_quotes(
            &out.join(lob_io::quotes_file(date)),
            format,
            date,
            qrows.iter().map(|(s, r)| (*s, r.as_slice())),
        )?;
        lob_io::write_trades(
            &out.join(lob_io::trades_file(date)),
            format,
            date,
            trows.iter().map(|(s, r)| (*s, r.as_slice())),
        )?;
    }
    copy_if_exists(&raw.join(MEMBERSHIP_FILE), &out.join(MEMBERSHIP_FILE))?;
    copy_if_exists(&raw.join(SUPPLY_FILE), &out.join(SUPPLY_FILE))?;
    RunManifest::record(run, "sample", cfg, vec![out.clone()], serde_json::json!({ "stats": stats }))?;
    Ok(out)
}

/// Buckets and encodes sampled rows, `sampled` defaulting to `run/sampled`.
pub fn encode(cfg: &ExperimentConfig, run: &Path) -> Result<PathBuf> {
    let format = cfg.data.format()?;
    let sampled = cfg.data.sampled_dir.clone().unwrap_or_else(|| run.join("sampled"));
    let ds = Dataset::from_sampled_dir(&sampled, format, &cfg.buckets.anchors, cfg.buckets.bucket_window())?;
    let out = run.join("encoded");
    ds.write_encoded(&out)?;
    copy_if_exists(&sampled.join(MEMBERSHIP_FILE), &out.join(MEMBERSHIP_FILE))?;
    copy_if_exists(&sampled.join(SUPPLY_FILE), &out.join(SUPPLY_FILE))?;
    RunManifest::record(
        run,
        "encode",
        cfg,
        vec![out.clone()],
        serde_json::json!({ "buckets": ds.records.len(), "dropped": ds.dropped.len() }),
    )?;
    Ok(out)
}

/// Loads the dataset a run trains on: an encoded directory, else a sampled
/// one, else `run/encoded` when present, else the synthetic market in memory.
/// Membership and supply-chain files come from the config or sit next to
/// the data.
pub fn load_dataset(cfg: &ExperimentConfig, run: &Path) -> Result<Dataset> {
    let format = cfg.data.format()?;
    let window = cfg.buckets.bucket_window();
    let run_encoded = run.join("encoded");
    let (mut ds, data_dir) = if let Some(dir) = &cfg.data.encoded_dir {
        (Dataset::read_encoded(dir)?, Some(dir.clone()))
    } else if let Some(dir) = &cfg.data.sampled_dir {
        (Dataset::from_sampled_dir(dir, format, &cfg.buckets.anchors, window)?, Some(dir.clone()))
    } else if run_encoded.join(super::dataset::ENCODED_MANIFEST).exists() {
        (Dataset::read_encoded(&run_encoded)?, Some(run_encoded))
    } else {
        log::info!("no data directory configured; generating the synthetic market in memory");
        (Dataset::synthetic(&cfg.data.synthetic, window)?, None)
    };
    if ds.window != window || ds.anchors != cfg.buckets.anchors {
        return Err(Error::Config(format!(
            "encoded data uses window {:?} and anchors {:?}, config asks for {:?} and {:?}",
            ds.window, ds.anchors, window, cfg.buckets.anchors
        )));
    }
    let beside = |name: &str| data_dir.as_ref().map(|d| d.join(name)).filter(|p| p.exists());
    if let Some(path) = cfg.data.membership.clone().or_else(|| beside(MEMBERSHIP_FILE)) {
        ds.membership = read_membership(&path, format)?;
    }
    if let Some(path) = cfg.data.supply_chain.clone().or_else(|| beside(SUPPLY_FILE)) {
        ds.supply_pairs = resolve_pairs(&ds.universe, &read_supply_chain(&path, format)?);
    }
    if ds.membership.labels.is_empty() {
        log::warn!("no sector membership; sector edges will be empty");
    }
    Ok(ds)
}

/// Writes every relation's edges and the union statistics under `run/graph`.
pub fn build_graph(cfg: &ExperimentConfig, run: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let ds = load_dataset(cfg, run)?;
    let prep = Prepared::new(&ds, cfg)?;
    let dir = run.join("graph");
    mkdir(&dir)?;
    write_edges(&dir.join("edges.csv"), cfg.data.format()?, &prep.space, &prep.edge_sets)?;
    let (_, stats) = prep.graph_for(&crate::graph::Relation::ALL);
    write_json(&dir.join("graph_stats.json"), &stats)?;
    write_json(&dir.join("audit.json"), &prep.audit)?;
    log::info!("{} edges after union ({} before)", stats.union, stats.naive_sum);
    RunManifest::record(run, "build-graph", cfg, vec![dir.clone()], serde_json::to_value(&stats).expect("stats serialize"))?;
    Ok(dir)
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

/// Fits every configured model for every seed and persists predictions,
/// checkpoints, training logs, the leakage audit and a failure manifest.
/// Returns the first failure after everything else has been written.
pub fn train(cfg: &ExperimentConfig, run: &Path) -> Result<ExperimentResult> {
    let ds = load_dataset(cfg, run)?;
    let result = run_experiment(&ds, cfg)?;
    mkdir(run)?;
    write_predictions(&run.join(PREDICTIONS_FILE), &result.prediction_records())?;
    let ckpt_dir = run.join("checkpoints");
    mkdir(&ckpt_dir)?;
    let mut logs = BTreeMap::new();
    for r in &result.runs {
        if let Some(m) = &r.gtn {
            Checkpoint {
                model: m.clone(),
                standardizer: Some(result.prepared.standardizer.clone()),
                log: r.train_log.clone(),
            }
            .save(&ckpt_dir.join(format!("{}_seed{}.ckpt", slug(&r.model), r.seed)))?;
        }
        if let Some(l) = &r.train_log {
            logs.insert(format!("{} seed {}", r.model, r.seed), l.clone());
        }
    }
    write_json(&run.join("train_logs.json"), &logs)?;
    write_json(&run.join("failures.json"), &result.failures)?;
    write_json(&run.join("audit.json"), &result.prepared.audit)?;
    let stats: BTreeMap<String, _> = result
        .runs
        .iter()
        .filter_map(|r| r.graph_stats.clone().map(|s| (r.model.clone(), s)))
        .collect();
    RunManifest::record(
        run,
        "train",
        cfg,
        vec![run.join(PREDICTIONS_FILE), ckpt_dir],
        serde_json::json!({
            "split": {
                "boundaries": result.prepared.split.boundaries,
                "proportions": result.prepared.split.proportions(),
            },
            "graphs": stats,
            "failures": result.failures.len(),
            "audit_clean": result.prepared.audit.is_clean(),
        }),
    )?;
    if let Some(f) = result.failures.first() {
        let msg = format!("{} of {} model runs failed, first: {} seed {}: {}", result.failures.len(), result.failures.len() + result.runs.len(), f.model, f.seed, f.error);
        return Err(match f.exit_code {
            2 => Error::Config(msg),
            4 => Error::Numerical(msg),
            _ => Error::Data(msg),
        });
    }
    Ok(result)
}

/// Metric tables from the prediction table of a run.
pub fn evaluate(cfg: &ExperimentConfig, run: &Path) -> Result<String> {
    let records = read_predictions(&run.join(PREDICTIONS_FILE))?;
    let header = ReportHeader::new(&cfg.hash(), &cfg.seeds);
    let rows = metric_rows(&records)?;
    let summary = summary_rows(&rows);
    write_text(&run.join("metrics.csv"), &render_metrics(&header, &rows))?;
    write_text(&run.join("summary.csv"), &render_summary(&header, &summary))?;
    let md = summary_markdown(&header, &summary);
    write_text(&run.join("summary.md"), &md)?;
    RunManifest::record(
        run,
        "evaluate",
        cfg,
        vec![run.join("metrics.csv"), run.join("summary.csv"), run.join("summary.md")],
        serde_json::Value::Null,
    )?;
    Ok(md)
}

/// Test RMSPE of one checkpoint on the configured dataset.
pub fn evaluate_checkpoint(cfg: &ExperimentConfig, run: &Path, path: &Path, relations: &[crate::graph::Relation]) -> Result<f64> {
    let ckpt = Checkpoint::load(path)?;
    let ds = load_dataset(cfg, run)?;
    let prep = Prepared::new(&ds, cfg)?;
    let (graph, _) = prep.graph_for(relations);
    let mut features = prep.features.clone();
    if let Some(st) = &ckpt.standardizer {
        let raw = ds.features();
        for (f, &node) in raw.iter().zip(&prep.record_nodes) {
            let mut row = features.row_mut(node as usize);
            st.transform_into(&f.values, row.as_slice_mut().expect("standard layout"));
        }
    }
    let inputs = crate::model::GraphInputs {
        graph,
        features,
        symbols: prep.symbols.clone(),
    };
    crate::model::evaluate(&ckpt.model, &inputs, &prep.test, &prep.targets)
}

/// Liquidity and degree reports per seed, as tables and SVG plots.
pub fn report(cfg: &ExperimentConfig, run: &Path) -> Result<Vec<PathBuf>> {
    let records = read_predictions(&run.join(PREDICTIONS_FILE))?;
    let ds = load_dataset(cfg, run)?;
    let prep = Prepared::new(&ds, cfg)?;
    let header = ReportHeader::new(&cfg.hash(), &cfg.seeds);
    let dir = run.join("reports");
    mkdir(&dir)?;
    let train_days = ds.day_index(prep.split.boundaries.val_start).unwrap_or(ds.dates.len());
    let turnover = ds.mean_turnover(0..train_days);
    let models = &cfg.report.models;
    // degrees come from the graph of the last GTN among the report models
    let relations = models
        .iter()
        .rev()
        .find_map(|m| cfg.models.iter().find(|s| &s.name == m && s.kind == ModelKind::Gtn))
        .map(|s| s.relations.clone())
        .unwrap_or_default();
    let (graph, _) = prep.graph_for(&relations);
    let degree = |r: &super::experiment::PredictionRecord| {
        prep.space
            .time_index(r.date, r.anchor)
            .map(|t| graph.in_degree(prep.space.node(r.symbol_id as usize, t)))
    };
    let mut outputs = Vec::new();
    for &seed in &cfg.seeds {
        let liq = liquidity_report(&records, seed, &turnover, models, cfg.report.liquidity_buckets)?;
        let deg = degree_report(&records, seed, degree, models, cfg.report.degree_buckets)?;
        for (rep, name, title, xlabel) in [
            (&liq, "liquidity", "Test RMSPE by turnover bucket", "turnover bucket (least to most liquid)"),
            (&deg, "degree", "Test RMSPE by in-degree bucket", "in-degree bucket (0 = isolated)"),
        ] {
            let csv = dir.join(format!("{name}_seed{seed}.csv"));
            let svg = dir.join(format!("{name}_seed{seed}.svg"));
            write_text(&csv, &rep.render(&header))?;
            write_text(&svg, &rep.svg(title, xlabel))?;
            outputs.extend([csv, svg]);
        }
    }
    RunManifest::record(run, "report", cfg, outputs.clone(), serde_json::Value::Null)?;
    Ok(outputs)
}

/// Sector granularity sweep written to `run/sector_sweep.csv`.
pub fn sweep(cfg: &ExperimentConfig, run: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let ds = load_dataset(cfg, run)?;
    let prep = Prepared::new(&ds, cfg)?;
    let rows = sector_sweep(&ds, &prep, cfg)?;
    mkdir(run)?;
    let path = run.join("sector_sweep.csv");
    write_text(&path, &render_sweep(&ReportHeader::new(&cfg.hash(), &cfg.seeds), &rows))?;
    RunManifest::record(run, "sweep", cfg, vec![path.clone()], serde_json::to_value(&rows).expect("rows serialize"))?;
    Ok(path)
}
