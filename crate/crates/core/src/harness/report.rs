//! Metric tables, bucketed ablation reports and their SVG rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::{PredictionRecord, VERSION};
use super::split::Part;
use crate::error::{Error, Result};
use crate::metrics::{rmspe, EPSILON};

/// Provenance printed at the top of every table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
}

impl ReportHeader {
    pub fn new(config_hash: &str, seeds: &[u64]) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            seeds: seeds.to_vec(),
            version: VERSION.to_string(),
        }
    }

    pub fn preamble(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# config_hash={}\n# seeds={}\n# version={}\n",
            self.config_hash,
            seeds.join(" "),
            self.version
        )
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "N.A.".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub seed: u64,
    pub val_rmspe: Option<f64>,
    pub test_rmspe: Option<f64>,
}

fn group_rmspe<'a>(recs: impl Iterator<Item = &'a PredictionRecord>) -> Result<Option<f64>> {
    let (p, t): (Vec<f64>, Vec<f64>) = recs.map(|r| (r.prediction, r.target)).unzip();
    if p.is_empty() {
        Ok(None)
    } else {
        rmspe(&p, &t, EPSILON).map(Some)
    }
}

/// Models in order of first appearance.
pub fn model_order(records: &[PredictionRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if !out.contains(&r.model) {
            out.push(r.model.clone());
        }
    }
    out
}

/// Validation and test RMSPE per model and seed.
pub fn metric_rows(records: &[PredictionRecord]) -> Result<Vec<MetricRow>> {
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut rows = Vec::new();
    for model in model_order(records) {
        for &seed in &seeds {
            let model = model.as_str();
            let of = |part: Part| {
                records
                    .iter()
                    .filter(move |r| r.model == model && r.seed == seed && r.split == part)
            };
            if of(Part::Val).next().is_none() && of(Part::Test).next().is_none() {
                continue;
            }
            rows.push(MetricRow {
                model: model.to_string(),
                seed,
                val_rmspe: group_rmspe(of(Part::Val))?,
                test_rmspe: group_rmspe(of(Part::Test))?,
            });
        }
    }
    Ok(rows)
}

pub fn render_metrics(header: &ReportHeader, rows: &[MetricRow]) -> String {
    let mut s = header.preamble();
    s.push_str("model,seed,val_rmspe,test_rmspe\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.model, r.seed, fmt_opt(r.val_rmspe), fmt_opt(r.test_rmspe));
    }
    s
}

/// Seed-averaged comparison table: one row per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub val_mean: Option<f64>,
    pub test_mean: Option<f64>,
    /// Population standard deviation of test RMSPE over seeds.
    pub test_std: Option<f64>,
    pub seeds: usize,
}

pub fn summary_rows(rows: &[MetricRow]) -> Vec<SummaryRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.model.as_str()) {
            order.push(&r.model);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    order
        .into_iter()
        .map(|m| {
            let mine: Vec<&MetricRow> = rows.iter().filter(|r| r.model == m).collect();
            let val: Vec<f64> = mine.iter().filter_map(|r| r.val_rmspe).collect();
            let test: Vec<f64> = mine.iter().filter_map(|r| r.test_rmspe).collect();
            let tm = mean(&test);
            let std = tm.map(|mu| (test.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / test.len() as f64).sqrt());
            SummaryRow {
                model: m.to_string(),
                val_mean: mean(&val),
                test_mean: tm,
                test_std: std,
                seeds: mine.len(),
            }
        })
        .collect()
}

pub fn render_summary(header: &ReportHeader, rows: &[SummaryRow]) -> String {
    let mut s = header.preamble();
    s.push_str("model,val_rmspe,test_rmspe,test_rmspe_std,seeds\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.model,
            fmt_opt(r.val_mean),
            fmt_opt(r.test_mean),
            fmt_opt(r.test_std),
            r.seeds
        );
    }
    s
}

/// Markdown rendering of the summary for the run report.
pub fn summary_markdown(header: &ReportHeader, rows: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "| Model | Val RMSPE | Test RMSPE |\n|---|---|---|");
    for r in rows {
        let _ = writeln!(s, "| {} | {} | {} |", r.model, fmt_opt(r.val_mean), fmt_opt(r.test_mean));
    }
    let _ = writeln!(
        s,
        "\nconfig `{}`, seeds {:?}, {}",
        header.config_hash, header.seeds, header.version
    );
    s
}

/// One row of a bucketed RMSPE table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: usize,
    /// Range of the bucketing key (turnover or in-degree).
    pub key_min: f64,
    pub key_max: f64,
    /// Stocks (liquidity) or nodes (degree) in the bucket.
    pub members: usize,
    pub rmspe: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub key: String,
    pub seed: u64,
    pub rows: Vec<BucketRow>,
    /// Least-squares slope of RMSPE on bucket rank, per model, over the
    /// non-isolated buckets.
    pub slopes: BTreeMap<String, f64>,
}

/// Least-squares slope of `y` on `x`; 0 for fewer than two distinct `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx
}

/// Splits `0..n` items, already sorted by key, into `b` contiguous groups
/// whose sizes differ by at most one.
pub fn quantile_groups(n: usize, b: usize) -> Vec<std::ops::Range<usize>> {
    (0..b).map(|k| k * n / b..(k + 1) * n / b).collect()
}

fn bucket_rows(
    groups: &[(f64, f64, usize, Vec<&PredictionRecord>)],
    models: &[String],
) -> Result<Vec<BucketRow>> {
    groups
        .iter()
        .enumerate()
        .map(|(i, (lo, hi, members, recs))| {
            let mut rmspe = BTreeMap::new();
            for m in models {
                if let Some(v) = group_rmspe(recs.iter().copied().filter(|r| &r.model == m))? {
                    rmspe.insert(m.clone(), v);
                }
            }
            Ok(BucketRow {
                bucket: i,
                key_min: *lo,
                key_max: *hi,
                members: *members,
                rmspe,
            })
        })
        .collect()
}

fn slopes(rows: &[BucketRow], models: &[String], skip_first: bool) -> BTreeMap<String, f64> {
    let used = if skip_first { &rows[1.min(rows.len())..] } else { rows };
    models
        .iter()
        .map(|m| {
            let (x, y): (Vec<f64>, Vec<f64>) = used
                .iter()
                .filter_map(|r| r.rmspe.get(m).map(|&v| (r.bucket as f64, v)))
                .unzip();
            (m.clone(), ols_slope(&x, &y))
        })
        .collect()
}

fn check_models(records: &[&PredictionRecord], models: &[String]) -> Result<()> {
    for m in models {
        if !records.iter().any(|r| &r.model == m) {
            return Err(Error::Config(format!("no predictions for report model {m:?}")));
        }
    }
    Ok(())
}

/// Test RMSPE per turnover-quantile bucket of stocks, from least to most
/// liquid. `turnover[s]` is the mean daily traded value of symbol `s`.
pub fn liquidity_report(
    records: &[PredictionRecord],
    seed: u64,
    turnover: &[f64],
    models: &[String],
    buckets: usize,
) -> Result<BucketReport> {
    let recs: Vec<&PredictionRecord> = records.iter().filter(|r| r.seed == seed && r.split == Part::Test).collect();
    check_models(&recs, models)?;
    let mut stocks: Vec<usize> = (0..turnover.len()).collect();
    stocks.sort_by(|&a, &b| turnover[a].total_cmp(&turnover[b]).then(a.cmp(&b)));
    let mut b = buckets;
    if b > stocks.len() {
        log::warn!("{} liquidity buckets for {} stocks; using {}", buckets, stocks.len(), stocks.len());
        b = stocks.len();
    }
    let mut bucket_of = vec![0usize; turnover.len()];
    let ranges = quantile_groups(stocks.len(), b);
    for (k, r) in ranges.iter().enumerate() {
        for &s in &stocks[r.clone()] {
            bucket_of[s] = k;
        }
    }
    let mut groups: Vec<(f64, f64, usize, Vec<&PredictionRecord>)> = ranges
        .iter()
        .map(|r| {
            let keys: Vec<f64> = stocks[r.clone()].iter().map(|&s| turnover[s]).collect();
            (keys[0], keys[keys.len() - 1], keys.len(), Vec::new())
        })
        .collect();
    for r in &recs {
        let s = r.symbol_id as usize;
        if s >= turnover.len() {
            return Err(Error::Data(format!("prediction for unknown symbol id {s}")));
        }
        groups[bucket_of[s]].3.push(r);
    }
    let rows = bucket_rows(&groups, models)?;
    Ok(BucketReport {
        key: "turnover".into(),
        seed,
        slopes: slopes(&rows, models, false),
        rows,
    })
}

/// Test RMSPE per in-degree bucket. Bucket 0 holds isolated nodes (possibly
/// none); the rest are degree quantiles. `degree` maps a record to the
/// in-degree of its node.
pub fn degree_report(
    records: &[PredictionRecord],
    seed: u64,
    degree: impl Fn(&PredictionRecord) -> Option<usize>,
    models: &[String],
    buckets: usize,
) -> Result<BucketReport> {
    let recs: Vec<&PredictionRecord> = records.iter().filter(|r| r.seed == seed && r.split == Part::Test).collect();
    check_models(&recs, models)?;
    // one entry per test node, keyed by (symbol, date, anchor)
    let mut nodes: BTreeMap<(u32, chrono::NaiveDate, u32), (usize, Vec<&PredictionRecord>)> = BTreeMap::new();
    for r in &recs {
        let d = degree(r).ok_or_else(|| Error::Data(format!("no graph node for {} {} {}", r.symbol_id, r.date, r.anchor)))?;
        nodes.entry((r.symbol_id, r.date, r.anchor)).or_insert((d, Vec::new())).1.push(r);
    }
    let mut entries: Vec<(usize, Vec<&PredictionRecord>)> = nodes.into_values().collect();
    entries.sort_by_key(|e| e.0);
    let split = entries.partition_point(|e| e.0 == 0);
    let (isolated, rest) = entries.split_at(split);
    fn collect<'r>(es: &[(usize, Vec<&'r PredictionRecord>)]) -> Vec<&'r PredictionRecord> {
        es.iter().flat_map(|e| e.1.iter().copied()).collect()
    }
    let mut groups = vec![(0.0, 0.0, isolated.len(), collect(isolated))];
    let mut b = buckets;
    if b > rest.len() {
        if !rest.is_empty() {
            log::warn!("{} degree buckets for {} connected nodes; using {}", buckets, rest.len(), rest.len());
        }
        b = rest.len();
    }
    for r in quantile_groups(rest.len(), b) {
        let slice = &rest[r];
        groups.push((slice[0].0 as f64, slice[slice.len() - 1].0 as f64, slice.len(), collect(slice)));
    }
    let rows = bucket_rows(&groups, models)?;
    Ok(BucketReport {
        key: "in_degree".into(),
        seed,
        slopes: slopes(&rows, models, true),
        rows,
    })
}

impl BucketReport {
    /// Plot-ready table: one row per bucket and model.
    pub fn render(&self, header: &ReportHeader) -> String {
        let mut s = header.preamble();
        for (m, v) in &self.slopes {
            let _ = writeln!(s, "# slope[{m}]={v:.6e}");
        }
        let _ = writeln!(s, "seed,bucket,{k}_min,{k}_max,members,model,rmspe", k = self.key);
        for r in &self.rows {
            for (m, v) in &r.rmspe {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{:.6}",
                    self.seed, r.bucket, r.key_min, r.key_max, r.members, m, v
                );
            }
        }
        s
    }

    /// Scatter of bucket RMSPE with one least-squares line per model.
    pub fn svg(&self, title: &str, x_label: &str) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 50.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let pts: Vec<f64> = self.rows.iter().flat_map(|r| r.rmspe.values().copied()).collect();
        let ymax = pts.iter().copied().fold(0.0f64, f64::max).max(1e-12) * 1.1;
        let nb = self.rows.len().max(2) as f64 - 1.0;
        let px = |b: f64| PAD + b / nb * (W - 2.0 * PAD);
        let py = |v: f64| H - PAD - v / ymax * (H - 2.0 * PAD);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, xml_escape(title));
        let _ = writeln!(
            s,
            r#"<line x1="{PAD}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y0}" stroke="black"/>"#,
            y0 = H - PAD,
            x1 = W - PAD
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 12.0,
            xml_escape(x_label)
        );
        let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">RMSPE</text>"#, H / 2.0, H / 2.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{ymax:.3}</text>"#, PAD - 4.0, PAD + 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, PAD - 4.0, H - PAD);
        for (i, (model, slope)) in self.slopes.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let (x, y): (Vec<f64>, Vec<f64>) = self
                .rows
                .iter()
                .filter_map(|r| r.rmspe.get(model).map(|&v| (r.bucket as f64, v)))
                .unzip();
            for (&b, &v) in x.iter().zip(&y) {
                let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, px(b), py(v));
            }
            if !x.is_empty() {
                let n = x.len() as f64;
                let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
                let (x0, x1) = (x[0], x[x.len() - 1]);
                let line = |b: f64| my + slope * (b - mx);
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{c}" stroke-width="2"/>"#,
                    px(x0),
                    py(line(x0)),
                    px(x1),
                    py(line(x1))
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{c}">{} (slope {:.2e})</text>"#,
                PAD + 10.0,
                PAD + 16.0 * i as f64,
                xml_escape(model),
                slope
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
