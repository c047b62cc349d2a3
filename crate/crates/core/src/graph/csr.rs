//! Merged adjacency in compressed sparse rows keyed by destination.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EdgeSet, Relation};

/// In-neighbour lists: `sources[offsets[v]..offsets[v + 1]]` feed node `v`,
/// ascending by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    sources: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    /// Edges per relation before merging.
    pub per_relation: BTreeMap<Relation, usize>,
    pub naive_sum: usize,
    /// Distinct `(src, dst)` pairs after merging.
    pub union: usize,
}

impl Graph {
    /// A graph with no edges.
    pub fn empty(n_nodes: usize) -> Self {
        Self {
            offsets: vec![0; n_nodes + 1],
            sources: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.sources.len()
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.sources[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Builds from arbitrary `(src, dst)` pairs; duplicates are merged.
    pub fn from_edges(n_nodes: usize, mut edges: Vec<(u32, u32)>) -> Self {
        edges.sort_unstable_by_key(|&(s, d)| (d, s));
        edges.dedup();
        let mut offsets = vec![0usize; n_nodes + 1];
        for &(_, d) in &edges {
            offsets[d as usize + 1] += 1;
        }
        for i in 0..n_nodes {
            offsets[i + 1] += offsets[i];
        }
        Self {
            offsets,
            sources: edges.into_iter().map(|(s, _)| s).collect(),
        }
    }
}

/// Merges edge sets over one node space, dropping repeated `(src, dst)`.
pub fn union_dedup(sets: &[EdgeSet], n_nodes: usize) -> (Graph, GraphStats) {
    let mut stats = GraphStats::default();
    let mut all = Vec::with_capacity(sets.iter().map(EdgeSet::len).sum());
    for set in sets {
        *stats.per_relation.entry(set.relation).or_default() += set.len();
        stats.naive_sum += set.len();
        all.extend_from_slice(&set.edges);
    }
    let graph = Graph::from_edges(n_nodes, all);
    stats.union = graph.n_edges();
    (graph, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disjoint_and_identical_sets() {
        let a = EdgeSet::new(Relation::Sector, vec![(0, 1), (2, 1)]);
        let b = EdgeSet::new(Relation::SupplyChain, vec![(1, 0)]);
        let (g, stats) = union_dedup(&[a.clone(), b], 3);
        assert_eq!(stats.union, 3);
        assert_eq!(stats.naive_sum, 3);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(0), &[1]);
        assert!(g.neighbors(2).is_empty());
        let (_, stats) = union_dedup(&[a.clone(), a], 3);
        assert_eq!(stats.union, 2);
        assert_eq!(stats.naive_sum, 4);
    }

    proptest! {
        #[test]
        fn union_never_exceeds_sum(
            e1 in proptest::collection::vec((0u32..20, 0u32..20), 0..60),
            e2 in proptest::collection::vec((0u32..20, 0u32..20), 0..60),
        ) {
            let a = EdgeSet::new(Relation::TemporalFc, e1);
            let b = EdgeSet::new(Relation::CrossFc, e2);
            let (g, stats) = union_dedup(&[a.clone(), b.clone()], 20);
            prop_assert!(stats.union <= a.len() + b.len());
            prop_assert!(stats.union >= a.len().max(b.len()));
            for &(s, d) in a.edges.iter().chain(&b.edges) {
                prop_assert!(g.neighbors(d as usize).binary_search(&s).is_ok());
            }
            for v in 0..20 {
                prop_assert!(g.neighbors(v).windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
