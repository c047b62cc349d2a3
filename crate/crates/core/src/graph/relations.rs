//! Sector and supply-chain edges between stocks at the same time.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EdgeSet, NodeSpace, Relation};
use crate::error::{Error, Result};
use crate::lob::{SymbolId, Universe};

/// Levels of the four-tier industry taxonomy, coarsest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sector,
    IndustryGroup,
    Industry,
    SubIndustry,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::Sector,
        Granularity::IndustryGroup,
        Granularity::Industry,
        Granularity::SubIndustry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::Sector => "sector",
            Granularity::IndustryGroup => "industry_group",
            Granularity::Industry => "industry",
            Granularity::SubIndustry => "sub_industry",
        }
    }

    fn column(self) -> usize {
        self as usize
    }
}

/// Taxonomy labels per symbol.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectorMembership {
    pub labels: BTreeMap<String, [String; 4]>,
}

impl SectorMembership {
    /// Dense group ids per universe symbol; `None` for symbols without a row.
    pub fn groups(&self, universe: &Universe, granularity: Granularity) -> Vec<Option<u32>> {
        let mut ids: BTreeMap<&str, u32> = BTreeMap::new();
        let mut missing = 0usize;
        let groups = universe
            .symbols()
            .iter()
            .map(|sym| match self.labels.get(sym) {
                Some(row) => {
                    let label = row[granularity.column()].as_str();
                    let next = ids.len() as u32;
                    Some(*ids.entry(label).or_insert(next))
                }
                None => {
                    missing += 1;
                    None
                }
            })
            .collect();
        if missing > 0 {
            log::warn!("{missing} symbols have no {} label and stay isolated", granularity.name());
        }
        groups
    }
}

/// Every ordered pair of distinct stocks sharing a group, at every time.
pub fn sector_edges(groups: &[Option<u32>], space: &NodeSpace) -> Result<EdgeSet> {
    if groups.len() != space.n_symbols() {
        return Err(Error::InvalidInput(format!(
            "{} group labels for {} symbols",
            groups.len(),
            space.n_symbols()
        )));
    }
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (s, g) in groups.iter().enumerate() {
        if let Some(g) = g {
            members.entry(*g).or_default().push(s);
        }
    }
    let mut edges = Vec::new();
    for t in 0..space.n_times() {
        for group in members.values() {
            for &i in group {
                for &j in group {
                    let (src, dst) = (space.node(j, t), space.node(i, t));
                    if i != j && space.is_present(src) && space.is_present(dst) {
                        edges.push((src as u32, dst as u32));
                    }
                }
            }
        }
    }
    Ok(EdgeSet::new(Relation::Sector, edges))
}

/// Resolves named supplier/customer pairs; unknown symbols are skipped.
pub fn resolve_pairs(universe: &Universe, pairs: &[(String, String)]) -> Vec<(SymbolId, SymbolId)> {
    let mut unknown = 0usize;
    let out = pairs
        .iter()
        .filter_map(|(a, b)| match (universe.id(a), universe.id(b)) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => {
                unknown += 1;
                None
            }
        })
        .collect();
    if unknown > 0 {
        log::warn!("skipped {unknown} supply-chain pairs with unknown symbols");
    }
    out
}

/// Both directions of every distinct supplier/customer pair, at every time.
pub fn supply_chain_edges(pairs: &[(SymbolId, SymbolId)], space: &NodeSpace) -> Result<EdgeSet> {
    let n = space.n_symbols();
    let mut unique = BTreeSet::new();
    for &(a, b) in pairs {
        if a.index() >= n || b.index() >= n {
            return Err(Error::InvalidInput(format!(
                "pair ({}, {}) outside universe of {n}",
                a.0, b.0
            )));
        }
        if a != b {
            unique.insert((a.min(b).index(), a.max(b).index()));
        }
    }
    let mut edges = Vec::with_capacity(2 * unique.len() * space.n_times());
    for t in 0..space.n_times() {
        for &(a, b) in &unique {
            let (na, nb) = (space.node(a, t), space.node(b, t));
            if space.is_present(na) && space.is_present(nb) {
                edges.push((na as u32, nb as u32));
                edges.push((nb as u32, na as u32));
            }
        }
    }
    Ok(EdgeSet::new(Relation::SupplyChain, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn space(n: usize, m: usize) -> NodeSpace {
        let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        NodeSpace::dense(n, (0..m as u32).map(|t| (d, t)).collect())
    }

    #[test]
    fn sector_counts() {
        let e = sector_edges(&[Some(0), Some(0), Some(0)], &space(3, 2)).unwrap();
        assert_eq!(e.len(), 12);
        let e = sector_edges(&[Some(0), Some(1), Some(2), None], &space(4, 5)).unwrap();
        assert!(e.is_empty());
        let e = sector_edges(&[Some(0), Some(1), Some(0), Some(1), Some(1)], &space(5, 3)).unwrap();
        assert_eq!(e.len(), (2 + 6) * 3);
    }

    #[test]
    fn supply_chain_counts() {
        let p = |a, b| (SymbolId(a), SymbolId(b));
        assert_eq!(supply_chain_edges(&[p(0, 1)], &space(3, 3)).unwrap().len(), 6);
        assert!(supply_chain_edges(&[], &space(3, 3)).unwrap().is_empty());
        assert_eq!(
            supply_chain_edges(&[p(0, 1), p(0, 1), p(1, 0)], &space(3, 3)).unwrap().len(),
            6
        );
    }

    #[test]
    fn coarser_granularity_has_more_edges() {
        let names: Vec<String> = (0..8).map(|i| format!("S{i}")).collect();
        let universe = Universe::new(names.clone()).unwrap();
        let mut m = SectorMembership::default();
        for (i, s) in names.iter().enumerate() {
            m.labels.insert(
                s.clone(),
                [
                    format!("{}", i / 8),
                    format!("{}", i / 4),
                    format!("{}", i / 2),
                    format!("{i}"),
                ],
            );
        }
        let sp = space(8, 2);
        let counts: Vec<usize> = Granularity::ALL
            .iter()
            .map(|&g| sector_edges(&m.groups(&universe, g), &sp).unwrap().len())
            .collect();
        assert_eq!(counts, vec![8 * 7 * 2, 2 * 4 * 3 * 2, 4 * 2 * 2, 0]);
    }

    #[test]
    fn unknown_pairs_are_skipped() {
        let universe = Universe::new(vec!["A".into(), "B".into()]).unwrap();
        let pairs = vec![("A".to_string(), "B".to_string()), ("A".to_string(), "Z".to_string())];
        assert_eq!(resolve_pairs(&universe, &pairs), vec![(SymbolId(0), SymbolId(1))]);
    }
}
