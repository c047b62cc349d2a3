//! Node space and edge construction over (stock, time) nodes.
//!
//! A node is a stock at one bucket anchor. Time slots are the distinct
//! `(date, anchor)` pairs of the dataset in chronological order; node id is
//! `time * n_symbols + symbol`. Slots with no bucket for a stock are absent
//! nodes: they carry no features and no edges.

pub mod csr;
pub mod io;
pub mod knn;
pub mod relations;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::NodeFeature;
use crate::lob::SymbolId;

pub use csr::{union_dedup, Graph, GraphStats};
pub use knn::{cross_fc_edges, rmspe_distance, temporal_fc_edges, FeatureGrid, KnnScope};
pub use relations::{sector_edges, supply_chain_edges, Granularity, SectorMembership};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    TemporalFc,
    CrossFc,
    Sector,
    SupplyChain,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::TemporalFc,
        Relation::CrossFc,
        Relation::Sector,
        Relation::SupplyChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::TemporalFc => "temporal_fc",
            Relation::CrossFc => "cross_fc",
            Relation::Sector => "sector",
            Relation::SupplyChain => "supply_chain",
        }
    }

    pub fn parse(s: &str) -> Option<Relation> {
        Relation::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub symbol: u32,
    pub time: u32,
}

/// Directed edges of one relation, stored as `(src, dst)` flat node ids.
///
/// Messages flow from `src` into `dst`. Sorted by `(dst, src)`, no self
/// loops, no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    pub relation: Relation,
    pub edges: Vec<(u32, u32)>,
}

impl EdgeSet {
    pub fn new(relation: Relation, mut edges: Vec<(u32, u32)>) -> Self {
        edges.retain(|&(s, d)| s != d);
        edges.sort_unstable_by_key(|&(s, d)| (d, s));
        edges.dedup();
        Self { relation, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Chronological time slots and node presence for a universe of `n` stocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpace {
    n_symbols: usize,
    times: Vec<(NaiveDate, u32)>,
    present: Vec<bool>,
}

impl NodeSpace {
    /// All slots present.
    pub fn dense(n_symbols: usize, times: Vec<(NaiveDate, u32)>) -> Self {
        let present = vec![true; n_symbols * times.len()];
        Self {
            n_symbols,
            times,
            present,
        }
    }

    pub fn from_features(n_symbols: usize, features: &[NodeFeature]) -> Result<Self> {
        let mut times: Vec<(NaiveDate, u32)> = features.iter().map(|f| (f.date, f.anchor)).collect();
        times.sort_unstable();
        times.dedup();
        let mut space = Self {
            n_symbols,
            present: vec![false; n_symbols * times.len()],
            times,
        };
        for f in features {
            let node = space.node_of(f)?;
            if std::mem::replace(&mut space.present[node], true) {
                return Err(Error::Data(format!(
                    "duplicate feature row for symbol {} at {} {}",
                    f.symbol.0, f.date, f.anchor
                )));
            }
        }
        Ok(space)
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_symbols * self.times.len()
    }

    pub fn times(&self) -> &[(NaiveDate, u32)] {
        &self.times
    }

    pub fn time_index(&self, date: NaiveDate, anchor: u32) -> Option<usize> {
        self.times.binary_search(&(date, anchor)).ok()
    }

    pub fn node(&self, symbol: usize, time: usize) -> usize {
        time * self.n_symbols + symbol
    }

    pub fn id(&self, node: usize) -> NodeId {
        NodeId {
            symbol: (node % self.n_symbols) as u32,
            time: (node / self.n_symbols) as u32,
        }
    }

    pub fn node_of(&self, f: &NodeFeature) -> Result<usize> {
        let s = f.symbol.index();
        if s >= self.n_symbols {
            return Err(Error::InvalidInput(format!(
                "symbol {s} outside universe of {}",
                self.n_symbols
            )));
        }
        let t = self.time_index(f.date, f.anchor).ok_or_else(|| {
            Error::InvalidInput(format!("no time slot for {} {}", f.date, f.anchor))
        })?;
        Ok(self.node(s, t))
    }

    pub fn is_present(&self, node: usize) -> bool {
        self.present[node]
    }

    pub fn symbol_of(&self, node: usize) -> SymbolId {
        SymbolId((node % self.n_symbols) as u32)
    }

    /// Number of leading time slots dated strictly before `date`.
    pub fn times_before(&self, date: NaiveDate) -> usize {
        self.times.partition_point(|&(d, _)| d < date)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_set_drops_loops_and_duplicates() {
        let e = EdgeSet::new(Relation::Sector, vec![(1, 0), (0, 0), (1, 0), (2, 0), (0, 1)]);
        assert_eq!(e.edges, vec![(1, 0), (2, 0), (0, 1)]);
    }

    #[test]
    fn node_ids_round_trip() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        let space = NodeSpace::dense(4, vec![(d, 1800), (d, 5400), (d, 9000)]);
        for node in 0..space.n_nodes() {
            let id = space.id(node);
            assert_eq!(space.node(id.symbol as usize, id.time as usize), node);
        }
        assert_eq!(space.time_index(d, 5400), Some(1));
        assert_eq!(space.time_index(d, 5401), None);
    }
}
