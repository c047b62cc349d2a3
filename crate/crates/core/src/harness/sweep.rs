//! Sector-only GTN at each taxonomy granularity.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::dataset::Dataset;
use super::experiment::gtn_run;
use super::pipeline::{projected_sector_edges, Prepared};
use super::report::ReportHeader;
use crate::error::Result;
use crate::graph::{union_dedup, Granularity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub granularity: Granularity,
    pub groups: usize,
    pub projected_edges: usize,
    /// `None` when skipped by the edge cap.
    pub edges: Option<usize>,
    pub val_rmspe: Option<f64>,
    pub test_rmspe: Option<f64>,
}

impl SweepRow {
    pub fn skipped(&self) -> bool {
        self.edges.is_none()
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Trains one sector-only GTN per granularity and seed. Granularities whose
/// projected edge count exceeds `graph.max_sector_edges` are skipped.
pub fn sector_sweep(ds: &Dataset, prep: &Prepared, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for g in Granularity::ALL {
        let groups = ds.membership.groups(&ds.universe, g);
        let distinct: std::collections::BTreeSet<u32> = groups.iter().flatten().copied().collect();
        let projected = projected_sector_edges(&groups, prep.space.n_times());
        let mut row = SweepRow {
            granularity: g,
            groups: distinct.len(),
            projected_edges: projected,
            edges: None,
            val_rmspe: None,
            test_rmspe: None,
        };
        if projected > cfg.graph.max_sector_edges {
            log::warn!(
                "{}: {projected} projected edges exceed the cap of {}; skipped",
                g.name(),
                cfg.graph.max_sector_edges
            );
            rows.push(row);
            continue;
        }
        let set = prep.sector_set(ds, g)?;
        row.edges = Some(set.len());
        let (mut val, mut test) = (Vec::new(), Vec::new());
        for &seed in &cfg.seeds {
            let (graph, stats) = union_dedup(std::slice::from_ref(&set), prep.space.n_nodes());
            let run = gtn_run(prep, cfg, &format!("GTN-VF {}", g.name()), graph, stats, seed)?;
            val.extend(run.val_rmspe);
            test.extend(run.test_rmspe);
        }
        row.val_rmspe = mean(&val);
        row.test_rmspe = mean(&test);
        rows.push(row);
    }
    Ok(rows)
}

pub fn render_sweep(header: &ReportHeader, rows: &[SweepRow]) -> String {
    let mut s = header.preamble();
    s.push_str("granularity,groups,projected_edges,edges,val_rmspe,test_rmspe\n");
    let na = |x: Option<String>| x.unwrap_or_else(|| "N.A.".into());
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.granularity.name(),
            r.groups,
            r.projected_edges,
            na(r.edges.map(|e| e.to_string())),
            na(r.val_rmspe.map(|v| format!("{v:.6}"))),
            na(r.test_rmspe.map(|v| format!("{v:.6}")))
        );
    }
    s
}
