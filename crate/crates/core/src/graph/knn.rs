//! K-nearest-neighbour edges under RMSPE distance.

use super::{EdgeSet, NodeSpace, Relation};
use crate::error::{Error, Result};
use crate::features::NodeFeature;
use crate::metrics::EPSILON;

/// `sqrt(mean(((a - b) / (b + eps))^2))`. Asymmetric: `b` is the reference.
pub fn rmspe_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    crate::metrics::rmspe(a, b, EPSILON)
}

/// Which time slots similarity vectors and candidate neighbours may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnScope {
    /// Every slot, as in the literal construction.
    All,
    /// Only the first `train_times` slots: similarity vectors are built from
    /// them and temporal candidates are drawn from them.
    LeakFree { train_times: usize },
}

impl KnnScope {
    fn limit(self, n_times: usize) -> usize {
        match self {
            KnnScope::All => n_times,
            KnnScope::LeakFree { train_times } => train_times.min(n_times),
        }
    }
}

/// One feature column laid out as a `time x symbol` grid.
#[derive(Debug, Clone)]
pub struct FeatureGrid<'a> {
    space: &'a NodeSpace,
    values: Vec<f64>,
}

impl<'a> FeatureGrid<'a> {
    pub fn new(space: &'a NodeSpace, features: &[NodeFeature], column: usize) -> Result<Self> {
        let mut values = vec![f64::NAN; space.n_nodes()];
        for f in features {
            values[space.node_of(f)?] = f.values[column];
        }
        Ok(Self { space, values })
    }

    /// Grid from raw `time x symbol` values; every slot present in `space`
    /// must be finite.
    pub fn from_values(space: &'a NodeSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "grid has {} values for {} nodes",
                values.len(),
                space.n_nodes()
            )));
        }
        Ok(Self { space, values })
    }

    fn get(&self, symbol: usize, time: usize) -> Option<f64> {
        let node = self.space.node(symbol, time);
        self.space.is_present(node).then(|| self.values[node])
    }
}

/// RMSPE over the positions both series observe; infinite when none.
fn masked_distance(pairs: impl Iterator<Item = (Option<f64>, Option<f64>)>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (a, b) in pairs {
        if let (Some(a), Some(b)) = (a, b) {
            sum += ((a - b) / (b + EPSILON)).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        f64::INFINITY
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Indices of the `k` smallest distances; ties go to the smaller index.
fn k_smallest(mut scored: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// For every time `t0`, the `k` times whose cross-section of the feature is
/// closest to that of `t0`; each stock at those times feeds the same stock
/// at `t0`.
pub fn temporal_fc_edges(grid: &FeatureGrid, k: usize, scope: KnnScope) -> Result<EdgeSet> {
    let space = grid.space;
    let (n, m) = (space.n_symbols(), space.n_times());
    if k == 0 || k >= m {
        return Err(Error::Config(format!(
            "temporal K must be in 1..{m}, got {k}"
        )));
    }
    let limit = scope.limit(m);
    let mut edges = Vec::with_capacity(k * n * m);
    for t0 in 0..m {
        let pool = (0..limit).filter(|&t| t != t0).count();
        if pool < k {
            return Err(Error::Config(format!(
                "temporal K = {k} exceeds the {pool} candidate times"
            )));
        }
        let scored = (0..limit)
            .filter(|&t| t != t0)
            .map(|t| {
                let d = masked_distance((0..n).map(|s| (grid.get(s, t0), grid.get(s, t))));
                (d, t)
            })
            .collect();
        for t in k_smallest(scored, k) {
            for s in 0..n {
                let (src, dst) = (space.node(s, t), space.node(s, t0));
                if space.is_present(src) && space.is_present(dst) {
                    edges.push((src as u32, dst as u32));
                }
            }
        }
    }
    Ok(EdgeSet::new(Relation::TemporalFc, edges))
}

/// For every stock `s0`, the `k` stocks whose time series of the feature is
/// closest to that of `s0`; at every time they feed `s0`.
pub fn cross_fc_edges(grid: &FeatureGrid, k: usize, scope: KnnScope) -> Result<EdgeSet> {
    let space = grid.space;
    let (n, m) = (space.n_symbols(), space.n_times());
    if k == 0 || k >= n {
        return Err(Error::Config(format!("cross K must be in 1..{n}, got {k}")));
    }
    let limit = scope.limit(m);
    let mut edges = Vec::with_capacity(k * n * m);
    for s0 in 0..n {
        let scored = (0..n)
            .filter(|&s| s != s0)
            .map(|s| {
                let d = masked_distance((0..limit).map(|t| (grid.get(s0, t), grid.get(s, t))));
                (d, s)
            })
            .collect();
        for s in k_smallest(scored, k) {
            for t in 0..m {
                let (src, dst) = (space.node(s, t), space.node(s0, t));
                if space.is_present(src) && space.is_present(dst) {
                    edges.push((src as u32, dst as u32));
                }
            }
        }
    }
    Ok(EdgeSet::new(Relation::CrossFc, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn space(n: usize, m: usize) -> NodeSpace {
        let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        NodeSpace::dense(n, (0..m as u32).map(|t| (d, 100 + t)).collect())
    }

    #[test]
    fn distance_examples() {
        assert_eq!(rmspe_distance(&[1.5, 2.5], &[1.5, 2.5]).unwrap(), 0.0);
        assert!((rmspe_distance(&[2.0], &[1.0]).unwrap() - 1.0).abs() < 1e-7);
        assert!((rmspe_distance(&[1.0, 1.0], &[2.0, 2.0]).unwrap() - 0.5).abs() < 1e-7);
        assert!(matches!(rmspe_distance(&[1.0], &[1.0, 2.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn temporal_toy_matches_brute_force() {
        let sp = space(2, 3);
        // time-major rows: t0 = [1, 2], t1 = [1.1, 2.1], t2 = [5, 9]
        let grid = FeatureGrid::from_values(&sp, vec![1.0, 2.0, 1.1, 2.1, 5.0, 9.0]).unwrap();
        let e = temporal_fc_edges(&grid, 1, KnnScope::All).unwrap();
        assert_eq!(e.len(), 6);
        let times: Vec<(u32, u32)> = e
            .edges
            .iter()
            .map(|&(s, d)| (sp.id(s as usize).time, sp.id(d as usize).time))
            .collect();
        // t0 <- t1, t1 <- t0, t2 <- t1 (closest to [5, 9] relative to the candidate)
        let mut pairs: Vec<(u32, u32)> = times.clone();
        pairs.sort();
        pairs.dedup();
        let expected_t2 = {
            let d0 = rmspe_distance(&[5.0, 9.0], &[1.0, 2.0]).unwrap();
            let d1 = rmspe_distance(&[5.0, 9.0], &[1.1, 2.1]).unwrap();
            if d1 < d0 { 1 } else { 0 }
        };
        assert_eq!(pairs, {
            let mut v = vec![(1, 0), (0, 1), (expected_t2, 2)];
            v.sort();
            v
        });
        for &(s, d) in &e.edges {
            assert_eq!(sp.id(s as usize).symbol, sp.id(d as usize).symbol);
        }
    }

    #[test]
    fn cross_toy_count_and_same_time() {
        let sp = space(3, 2);
        let grid = FeatureGrid::from_values(&sp, vec![1.0, 1.2, 3.0, 1.0, 1.3, 3.5]).unwrap();
        let e = cross_fc_edges(&grid, 1, KnnScope::All).unwrap();
        assert_eq!(e.len(), 6);
        for &(s, d) in &e.edges {
            assert_eq!(sp.id(s as usize).time, sp.id(d as usize).time);
        }
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let sp = space(2, 5);
        let grid = FeatureGrid::from_values(&sp, vec![1.0; 10]).unwrap();
        let e = temporal_fc_edges(&grid, 2, KnnScope::All).unwrap();
        assert_eq!(e.len(), 2 * 2 * 5);
        let into_t0: Vec<u32> = e
            .edges
            .iter()
            .filter(|&&(_, d)| sp.id(d as usize).time == 0)
            .map(|&(s, _)| sp.id(s as usize).time)
            .collect();
        // edges sorted by (dst, src): stock 0 then stock 1, each from times 1 and 2
        assert_eq!(into_t0, vec![1, 2, 1, 2]);
        let cross = cross_fc_edges(&grid, 1, KnnScope::All).unwrap();
        assert!(cross.edges.iter().all(|&(s, d)| {
            let (a, b) = (sp.id(s as usize).symbol, sp.id(d as usize).symbol);
            (a, b) == (1, 0) || (a, b) == (0, 1)
        }));
    }

    #[test]
    fn k_must_leave_candidates() {
        let sp = space(3, 4);
        let grid = FeatureGrid::from_values(&sp, vec![1.0; 12]).unwrap();
        assert!(matches!(temporal_fc_edges(&grid, 4, KnnScope::All), Err(Error::Config(_))));
        assert!(matches!(cross_fc_edges(&grid, 3, KnnScope::All), Err(Error::Config(_))));
        assert!(matches!(
            temporal_fc_edges(&grid, 2, KnnScope::LeakFree { train_times: 2 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn leak_free_candidates_stay_in_training() {
        let sp = space(4, 12);
        let vals: Vec<f64> = (0..48).map(|i| 1.0 + ((i * 7919) % 13) as f64).collect();
        let grid = FeatureGrid::from_values(&sp, vals).unwrap();
        let e = temporal_fc_edges(&grid, 3, KnnScope::LeakFree { train_times: 8 }).unwrap();
        assert_eq!(e.len(), 3 * 4 * 12);
        assert!(e.edges.iter().all(|&(s, _)| sp.id(s as usize).time < 8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn distance_is_nonnegative_and_zero_on_self(v in proptest::collection::vec(0.001f64..100.0, 1..40)) {
            prop_assert_eq!(rmspe_distance(&v, &v).unwrap(), 0.0);
            let w: Vec<f64> = v.iter().rev().copied().collect();
            prop_assert!(rmspe_distance(&v, &w).unwrap() >= 0.0);
        }

        #[test]
        fn knn_counts_are_exact(n in 2usize..6, m in 3usize..9, seed in 0u64..1000) {
            let sp = space(n, m);
            let vals: Vec<f64> = (0..n * m).map(|i| 1.0 + ((i as u64 * 2654435761 + seed) % 97) as f64).collect();
            let grid = FeatureGrid::from_values(&sp, vals).unwrap();
            let k = 1 + (seed as usize) % (m - 1);
            prop_assert_eq!(temporal_fc_edges(&grid, k, KnnScope::All).unwrap().len(), k * n * m);
            let k2 = 1 + (seed as usize) % (n - 1);
            prop_assert_eq!(cross_fc_edges(&grid, k2, KnnScope::All).unwrap().len(), k2 * n * m);
        }
    }
}
