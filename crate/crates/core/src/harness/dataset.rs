//! Encoded bucket collections and their on-disk form.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::synth::{stock_day_events, Latent, SyntheticSpec};
use crate::error::{Error, Result};
use crate::features::{encode_bucket, store, NodeFeature};
use crate::graph::SectorMembership;
use crate::lob::{
    build_buckets, io as lob_io, sample_quotes, sample_trades, BucketWindow, DroppedBucket, SampleStats, SampledDay,
    SymbolId, Universe,
};

/// An encoded bucket plus its naive forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub feature: NodeFeature,
    /// Realized volatility of the backward window.
    pub backward_rv: f64,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub universe: Universe,
    /// Trading days in order.
    pub dates: Vec<NaiveDate>,
    pub window: BucketWindow,
    pub anchors: Vec<u32>,
    /// Sorted by `(date, anchor, symbol)`.
    pub records: Vec<NodeRecord>,
    pub dropped: Vec<DroppedBucket>,
    /// Daily traded value, `turnover[stock][day]`.
    pub turnover: Vec<Vec<f64>>,
    pub membership: SectorMembership,
    pub supply_pairs: Vec<(SymbolId, SymbolId)>,
    pub sample_stats: SampleStats,
}

/// Buckets and turnover of one sampled stock-day.
pub fn encode_day(day: &SampledDay, anchors: &[u32], window: BucketWindow) -> Result<(Vec<NodeRecord>, Vec<DroppedBucket>)> {
    let batch = build_buckets(day, anchors, window)?;
    let records = batch
        .buckets
        .iter()
        .map(|b| {
            Ok(NodeRecord {
                feature: encode_bucket(b)?,
                backward_rv: crate::baselines::naive_guess(b),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, batch.dropped))
}

impl Dataset {
    fn empty(universe: Universe, dates: Vec<NaiveDate>, window: BucketWindow, anchors: Vec<u32>) -> Self {
        let n = universe.len();
        let m = dates.len();
        Self {
            universe,
            dates,
            window,
            anchors,
            records: Vec::new(),
            dropped: Vec::new(),
            turnover: vec![vec![0.0; m]; n],
            membership: SectorMembership::default(),
            supply_pairs: Vec::new(),
            sample_stats: SampleStats::default(),
        }
    }

    fn finish(mut self) -> Self {
        self.records.sort_by_key(|r| (r.feature.date, r.feature.anchor, r.feature.symbol));
        self
    }

    /// Generates, samples and encodes a synthetic market without touching disk.
    pub fn synthetic(spec: &SyntheticSpec, window: BucketWindow) -> Result<Self> {
        window.validate(&spec.anchors)?;
        let latent = Latent::new(spec)?;
        let universe = spec.universe();
        let mut ds = Self::empty(universe.clone(), spec.trading_days(), window, spec.anchors.clone());
        for (d, &date) in ds.dates.clone().iter().enumerate() {
            for s in 0..spec.n_stocks {
                let (q, t) = stock_day_events(spec, &latent, s, d);
                let (quotes, qs) = sample_quotes(&q)?;
                let (trades, ts) = sample_trades(&t)?;
                ds.sample_stats.merge(&qs);
                ds.sample_stats.merge(&ts);
                let day = SampledDay {
                    date,
                    symbol: SymbolId(s as u32),
                    quotes,
                    trades,
                };
                ds.turnover[s][d] = day.turnover();
                let (records, dropped) = encode_day(&day, &spec.anchors, window)?;
                ds.records.extend(records);
                ds.dropped.extend(dropped);
            }
        }
        ds.membership = spec.membership();
        ds.supply_pairs = latent
            .pairs
            .iter()
            .map(|&(a, b)| (SymbolId(a as u32), SymbolId(b as u32)))
            .collect();
        Ok(ds.finish())
    }

    /// Encodes every `quotes_*.csv` / `trades_*.csv` pair under `dir`.
    pub fn from_sampled_dir(dir: &Path, format: lob_io::TableFormat, anchors: &[u32], window: BucketWindow) -> Result<Self> {
        window.validate(anchors)?;
        let mut days = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if let Some(d) = name.strip_prefix("quotes_").and_then(|r| r.strip_suffix(".csv")) {
                if let Ok(date) = NaiveDate::parse_from_str(d, "%Y-%m-%d") {
                    days.push(date);
                }
            }
        }
        days.sort_unstable();
        if days.is_empty() {
            return Err(Error::Data(format!("no sampled quote files in {}", dir.display())));
        }
        let mut tables = Vec::with_capacity(days.len());
        let mut symbols = std::collections::BTreeSet::new();
        for &date in &days {
            let q = lob_io::read_quotes(&dir.join(lob_io::quotes_file(date)), format)?;
            let t = lob_io::read_trades(&dir.join(lob_io::trades_file(date)), format)?;
            symbols.extend(q.by_symbol.keys().cloned());
            symbols.extend(t.by_symbol.keys().cloned());
            tables.push((q, t));
        }
        let universe = Universe::new(symbols.into_iter().collect())?;
        let mut ds = Self::empty(universe.clone(), days.clone(), window, anchors.to_vec());
        for (d, (mut q, mut t)) in tables.into_iter().enumerate() {
            for (s, sym) in universe.symbols().iter().enumerate() {
                let day = SampledDay {
                    date: days[d],
                    symbol: SymbolId(s as u32),
                    quotes: q.by_symbol.remove(sym).unwrap_or_default(),
                    trades: t.by_symbol.remove(sym).unwrap_or_default(),
                };
                ds.turnover[s][d] = day.turnover();
                let (records, dropped) = encode_day(&day, anchors, window)?;
                ds.records.extend(records);
                ds.dropped.extend(dropped);
            }
        }
        Ok(ds.finish())
    }

    pub fn features(&self) -> Vec<NodeFeature> {
        self.records.iter().map(|r| r.feature.clone()).collect()
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Mean daily turnover per stock over the given days.
    pub fn mean_turnover(&self, days: std::ops::Range<usize>) -> Vec<f64> {
        self.turnover
            .iter()
            .map(|row| {
                let slice = &row[days.clone()];
                if slice.is_empty() {
                    0.0
                } else {
                    slice.iter().sum::<f64>() / slice.len() as f64
                }
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct BucketIndexRecord {
    symbol_id: u32,
    date: String,
    anchor: u32,
    backward_start: u32,
    forward_end: u32,
    backward_rv: f64,
    target: f64,
}

#[derive(Serialize, Deserialize)]
struct DroppedRecord {
    symbol_id: u32,
    date: String,
    anchor: u32,
    reason: String,
}

#[derive(Serialize, Deserialize)]
struct TurnoverRecord {
    symbol: String,
    date: String,
    turnover: f64,
}

#[derive(Serialize, Deserialize)]
struct UniverseRecord {
    symbol_id: u32,
    symbol: String,
}

#[derive(Serialize, Deserialize)]
pub struct EncodedManifest {
    pub window: BucketWindow,
    pub anchors: Vec<u32>,
    pub dates: Vec<NaiveDate>,
    pub buckets: usize,
    pub dropped: usize,
    pub sample_stats: SampleStats,
}

pub const FEATURES_FILE: &str = "features.csv";
pub const BUCKETS_FILE: &str = "buckets.csv";
pub const DROPPED_FILE: &str = "dropped.csv";
pub const TURNOVER_FILE: &str = "turnover.csv";
pub const UNIVERSE_FILE: &str = "universe.csv";
pub const ENCODED_MANIFEST: &str = "encode_manifest.json";

fn iso(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn parse_iso(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::Data(format!("bad date {s:?}")))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize().map(|x| x.map_err(|e| Error::csv(path, e))).collect()
}

impl Dataset {
    /// Writes the feature table, bucket index, drop manifest, turnover and
    /// universe under `dir`.
    pub fn write_encoded(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        store::write_feature_table(&dir.join(FEATURES_FILE), &self.features())?;
        write_csv(
            &dir.join(BUCKETS_FILE),
            self.records.iter().map(|r| BucketIndexRecord {
                symbol_id: r.feature.symbol.0,
                date: iso(r.feature.date),
                anchor: r.feature.anchor,
                backward_start: r.feature.anchor - self.window.backward,
                forward_end: r.feature.anchor + self.window.forward,
                backward_rv: r.backward_rv,
                target: r.feature.target,
            }),
        )?;
        write_csv(
            &dir.join(DROPPED_FILE),
            self.dropped.iter().map(|d| DroppedRecord {
                symbol_id: d.symbol.0,
                date: iso(d.date),
                anchor: d.anchor,
                reason: serde_json::to_value(d.reason)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            }),
        )?;
        write_csv(
            &dir.join(TURNOVER_FILE),
            self.universe.symbols().iter().enumerate().flat_map(|(s, sym)| {
                self.dates.iter().enumerate().map(move |(d, &date)| TurnoverRecord {
                    symbol: sym.clone(),
                    date: iso(date),
                    turnover: self.turnover[s][d],
                })
            }),
        )?;
        write_csv(
            &dir.join(UNIVERSE_FILE),
            self.universe.symbols().iter().enumerate().map(|(i, s)| UniverseRecord {
                symbol_id: i as u32,
                symbol: s.clone(),
            }),
        )?;
        let manifest = EncodedManifest {
            window: self.window,
            anchors: self.anchors.clone(),
            dates: self.dates.clone(),
            buckets: self.records.len(),
            dropped: self.dropped.len(),
            sample_stats: self.sample_stats,
        };
        let path = dir.join(ENCODED_MANIFEST);
        std::fs::write(&path, serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))
            .map_err(|e| Error::io(&path, e))
    }

    /// Reads what [`Dataset::write_encoded`] wrote. Membership and supply
    /// pairs are left empty.
    pub fn read_encoded(dir: &Path) -> Result<Self> {
        let mpath = dir.join(ENCODED_MANIFEST);
        let text = std::fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: EncodedManifest =
            serde_json::from_slice(&text).map_err(|e| Error::Data(format!("{}: {e}", mpath.display())))?;
        let mut uni: Vec<UniverseRecord> = read_csv(&dir.join(UNIVERSE_FILE))?;
        uni.sort_by_key(|u| u.symbol_id);
        if uni.iter().enumerate().any(|(i, u)| u.symbol_id as usize != i) {
            return Err(Error::Data("universe ids are not dense".into()));
        }
        let universe = Universe::new(uni.into_iter().map(|u| u.symbol).collect())?;
        let mut ds = Self::empty(universe.clone(), manifest.dates.clone(), manifest.window, manifest.anchors.clone());
        ds.sample_stats = manifest.sample_stats;

        let features = store::read_feature_table(&dir.join(FEATURES_FILE))?;
        let index: Vec<BucketIndexRecord> = read_csv(&dir.join(BUCKETS_FILE))?;
        let mut naive = BTreeMap::new();
        for r in index {
            naive.insert((r.symbol_id, parse_iso(&r.date)?, r.anchor), r.backward_rv);
        }
        for f in features {
            if f.symbol.index() >= universe.len() {
                return Err(Error::Data(format!("feature row for unknown symbol id {}", f.symbol.0)));
            }
            let backward_rv = *naive
                .get(&(f.symbol.0, f.date, f.anchor))
                .ok_or_else(|| Error::Data(format!("bucket index lacks {} {} {}", f.symbol.0, f.date, f.anchor)))?;
            ds.records.push(NodeRecord { feature: f, backward_rv });
        }
        for r in read_csv::<DroppedRecord>(&dir.join(DROPPED_FILE))? {
            let reason = serde_json::from_value(serde_json::Value::String(r.reason.clone()))
                .map_err(|_| Error::Data(format!("unknown drop reason {:?}", r.reason)))?;
            ds.dropped.push(DroppedBucket {
                symbol: SymbolId(r.symbol_id),
                date: parse_iso(&r.date)?,
                anchor: r.anchor,
                reason,
            });
        }
        for r in read_csv::<TurnoverRecord>(&dir.join(TURNOVER_FILE))? {
            let s = universe
                .id(&r.symbol)
                .ok_or_else(|| Error::Data(format!("turnover for unknown symbol {}", r.symbol)))?;
            let d = ds
                .day_index(parse_iso(&r.date)?)
                .ok_or_else(|| Error::Data(format!("turnover for unknown date {}", r.date)))?;
            ds.turnover[s.index()][d] = r.turnover;
        }
        Ok(ds.finish())
    }
}
