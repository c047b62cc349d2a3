//! Feature table on disk: `symbol_id,date,anchor,<73 feature columns>,target`.
//!
//! Dates are ISO `YYYY-MM-DD`. Column names are [`FEATURE_NAMES`].

use std::path::Path;

use chrono::NaiveDate;

use super::{NodeFeature, FEATURE_NAMES, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::lob::SymbolId;

pub fn write_feature_table(path: &Path, rows: &[NodeFeature]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["symbol_id", "date", "anchor"];
    header.extend(FEATURE_NAMES);
    header.push("target");
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    let mut rec: Vec<String> = Vec::with_capacity(NUM_FEATURES + 4);
    for f in rows {
        rec.clear();
        rec.push(f.symbol.0.to_string());
        rec.push(f.date.format("%Y-%m-%d").to_string());
        rec.push(f.anchor.to_string());
        rec.extend(f.values.iter().map(|v| v.to_string()));
        rec.push(f.target.to_string());
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<Vec<NodeFeature>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.len() != NUM_FEATURES + 4
        || header.iter().skip(3).take(NUM_FEATURES).ne(FEATURE_NAMES.iter().copied())
    {
        return Err(Error::Data(format!(
            "{}: feature header does not match the 73-column schema",
            path.display()
        )));
    }
    let bad = |what: &str, line: usize| Error::Data(format!("{}:{line}: bad {what}", path.display()));
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        let symbol = rec[0].parse::<u32>().map_err(|_| bad("symbol_id", line))?;
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|_| bad("date", line))?;
        let anchor = rec[2].parse::<u32>().map_err(|_| bad("anchor", line))?;
        let mut values = [0.0; NUM_FEATURES];
        for (k, v) in values.iter_mut().enumerate() {
            *v = rec[3 + k].parse().map_err(|_| bad(FEATURE_NAMES[k], line))?;
        }
        let target = rec[3 + NUM_FEATURES].parse().map_err(|_| bad("target", line))?;
        out.push(NodeFeature {
            symbol: SymbolId(symbol),
            date,
            anchor,
            values,
            target,
            imputed: 0,
        });
    }
    Ok(out)
}
