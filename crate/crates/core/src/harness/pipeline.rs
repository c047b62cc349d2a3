//! Everything derived from a dataset before any model is fitted: split,
//! node space, standardized inputs, relation edges and the leakage audit.

use std::collections::BTreeSet;

use ndarray::Array2;

use super::audit::{LeakAudit, Stamp};
use super::config::ExperimentConfig;
use super::dataset::Dataset;
use super::split::{boundaries, split_chronological, Split};
use crate::error::{Error, Result};
use crate::features::{Standardizer, NUM_FEATURES};
use crate::graph::{
    cross_fc_edges, sector_edges, supply_chain_edges, temporal_fc_edges, union_dedup, EdgeSet, FeatureGrid, Graph,
    GraphStats, Granularity, KnnScope, NodeSpace, Relation,
};

#[derive(Debug, Clone)]
pub struct Prepared {
    pub space: NodeSpace,
    pub split: Split,
    /// Node id of each dataset record.
    pub record_nodes: Vec<u32>,
    pub train: Vec<u32>,
    pub val: Vec<u32>,
    pub test: Vec<u32>,
    /// Per node id; 0 for absent nodes.
    pub targets: Vec<f64>,
    /// Backward-window RV per node id.
    pub naive: Vec<f64>,
    pub standardizer: Standardizer,
    /// Standardized features, one row per node id.
    pub features: Array2<f64>,
    pub symbols: Vec<u32>,
    /// Slots dated before the validation start.
    pub train_times: usize,
    pub edge_sets: Vec<EdgeSet>,
    pub audit: LeakAudit,
}

/// Latest second read by the backward window of `node`.
pub fn feature_stamp(space: &NodeSpace, node: usize) -> Stamp {
    let (date, anchor) = space.times()[space.id(node).time as usize];
    (date, anchor - 1)
}

/// Latest second read by the forward window of `node`.
pub fn target_stamp(space: &NodeSpace, node: usize, ds: &Dataset) -> Stamp {
    let (date, anchor) = space.times()[space.id(node).time as usize];
    (date, anchor + ds.window.forward - 1)
}

/// Projected pre-dedup sector edge count for a granularity.
pub fn projected_sector_edges(groups: &[Option<u32>], n_times: usize) -> usize {
    let mut sizes = std::collections::BTreeMap::<u32, usize>::new();
    for g in groups.iter().flatten() {
        *sizes.entry(*g).or_default() += 1;
    }
    sizes.values().map(|&g| g * g.saturating_sub(1)).sum::<usize>() * n_times
}

impl Prepared {
    pub fn new(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Self> {
        if ds.records.is_empty() {
            return Err(Error::Data("dataset has no buckets".into()));
        }
        let features = ds.features();
        let n = ds.universe.len();
        let space = NodeSpace::from_features(n, &features)?;
        let b = boundaries(&cfg.split, &ds.dates)?;
        let split = split_chronological(features.iter().map(|f| f.date), b)?;
        let record_nodes = features
            .iter()
            .map(|f| space.node_of(f).map(|x| x as u32))
            .collect::<Result<Vec<_>>>()?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| record_nodes[i]).collect::<Vec<u32>>();
        let (train, val, test) = (pick(&split.train), pick(&split.val), pick(&split.test));

        let mut targets = vec![0.0; space.n_nodes()];
        let mut naive = vec![0.0; space.n_nodes()];
        for (r, &node) in ds.records.iter().zip(&record_nodes) {
            targets[node as usize] = r.feature.target;
            naive[node as usize] = r.backward_rv;
        }

        let standardizer = Standardizer::fit(
            split.train.iter().map(|&i| &features[i].values[..]),
            cfg.standardize_clip,
        )?;
        let mut x = Array2::zeros((space.n_nodes(), NUM_FEATURES));
        for (f, &node) in features.iter().zip(&record_nodes) {
            let mut row = x.row_mut(node as usize);
            standardizer.transform_into(&f.values, row.as_slice_mut().expect("standard layout"));
        }
        let symbols = (0..space.n_nodes()).map(|v| space.symbol_of(v).0).collect();

        let train_times = space.times_before(b.val_start);
        let test_start = test.iter().map(|&v| {
            let (date, anchor) = space.times()[space.id(v as usize).time as usize];
            (date, anchor - ds.window.backward)
        });
        let mut audit = LeakAudit::new(test_start.min());
        audit.record(
            "standardizer",
            train.iter().map(|&v| feature_stamp(&space, v as usize)),
        );

        let scope = if cfg.graph.leak_free {
            KnnScope::LeakFree { train_times }
        } else {
            KnnScope::All
        };
        let slots = match scope {
            KnnScope::All => space.n_times(),
            KnnScope::LeakFree { train_times } => train_times,
        };
        audit.record(
            "similarity_vectors",
            (0..slots).flat_map(|t| (0..n).map(move |s| (s, t))).filter_map(|(s, t)| {
                let v = space.node(s, t);
                space.is_present(v).then(|| feature_stamp(&space, v))
            }),
        );

        let mut edge_sets = Vec::new();
        for col in cfg.graph.feature_columns()? {
            let grid = FeatureGrid::new(&space, &features, col)?;
            edge_sets.push(temporal_fc_edges(&grid, cfg.graph.k_temporal, scope)?);
            edge_sets.push(cross_fc_edges(&grid, cfg.graph.k_cross, scope)?);
        }
        edge_sets.push(sector_edges(
            &ds.membership.groups(&ds.universe, cfg.graph.sector_granularity),
            &space,
        )?);
        edge_sets.push(supply_chain_edges(&ds.supply_pairs, &space)?);

        Ok(Self {
            space,
            split,
            record_nodes,
            train,
            val,
            test,
            targets,
            naive,
            standardizer,
            features: x,
            symbols,
            train_times,
            edge_sets,
            audit,
        })
    }

    pub fn edge_sets_for(&self, relations: &[Relation]) -> Vec<EdgeSet> {
        let wanted: BTreeSet<Relation> = relations.iter().copied().collect();
        self.edge_sets
            .iter()
            .filter(|e| wanted.contains(&e.relation))
            .cloned()
            .collect()
    }

    /// Union graph over the chosen relations.
    pub fn graph_for(&self, relations: &[Relation]) -> (Graph, GraphStats) {
        union_dedup(&self.edge_sets_for(relations), self.space.n_nodes())
    }

    /// Sector edges at another granularity.
    pub fn sector_set(&self, ds: &Dataset, granularity: Granularity) -> Result<EdgeSet> {
        sector_edges(&ds.membership.groups(&ds.universe, granularity), &self.space)
    }

    /// Nodes whose features reach `seeds` within `hops` message-passing steps.
    pub fn closure(graph: &Graph, seeds: &[u32], hops: usize) -> Vec<u32> {
        let mut seen: BTreeSet<u32> = seeds.iter().copied().collect();
        let mut frontier: Vec<u32> = seen.iter().copied().collect();
        for _ in 0..hops {
            let mut next = Vec::new();
            for &v in &frontier {
                for &u in graph.neighbors(v as usize) {
                    if seen.insert(u) {
                        next.push(u);
                    }
                }
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    /// Records what fitting a model on `graph` reads: input features of the
    /// receptive field of the train and validation nodes, and their targets.
    pub fn audit_fit(&mut self, ds: &Dataset, name: &str, graph: Option<(&Graph, usize)>) {
        let fitted: Vec<u32> = self.train.iter().chain(&self.val).copied().collect();
        let inputs = match graph {
            Some((g, hops)) => Self::closure(g, &fitted, hops),
            None => fitted.clone(),
        };
        let space = &self.space;
        self.audit.record(
            format!("{name}: inputs"),
            inputs.iter().map(|&v| feature_stamp(space, v as usize)),
        );
        self.audit.record(
            format!("{name}: targets"),
            fitted.iter().map(|&v| target_stamp(space, v as usize, ds)),
        );
    }
}
