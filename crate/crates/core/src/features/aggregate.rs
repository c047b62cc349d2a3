//! Aggregation functions that collapse a window of per-row indicators into a
//! single feature value.
//!
//! Every aggregator returns 0 on an empty series. Positional aggregators
//! (`MeanFirst100`, `MeanLast100`) look at each value's offset inside the
//! window; for a plain series the offset is the element index.
//!
//! `Gini` is meant for non-negative data. On signed data whose mean is near
//! zero it is ill-conditioned and its magnitude is unbounded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of nested prefixes in a progressive feature.
pub const PROGRESSIVE_STEPS: usize = 6;

/// Width, in seconds, of the head/tail windows of the positional means.
const EDGE_WINDOW: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    Std,
    Sum,
    Max,
    Count,
    Gini,
    PctDifference,
    RealizedVolatility,
    PctGreaterMean,
    PctLessMean,
    PctGreaterZero,
    PctLessZero,
    MedianDeviation,
    Energy,
    Iqr,
    MeanFirst100,
    MeanLast100,
}

impl Aggregator {
    pub const ALL: [Aggregator; 17] = [
        Aggregator::Mean,
        Aggregator::Std,
        Aggregator::Sum,
        Aggregator::Max,
        Aggregator::Count,
        Aggregator::Gini,
        Aggregator::PctDifference,
        Aggregator::RealizedVolatility,
        Aggregator::PctGreaterMean,
        Aggregator::PctLessMean,
        Aggregator::PctGreaterZero,
        Aggregator::PctLessZero,
        Aggregator::MedianDeviation,
        Aggregator::Energy,
        Aggregator::Iqr,
        Aggregator::MeanFirst100,
        Aggregator::MeanLast100,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Mean => "mean",
            Aggregator::Std => "std",
            Aggregator::Sum => "sum",
            Aggregator::Max => "max",
            Aggregator::Count => "count",
            Aggregator::Gini => "gini",
            Aggregator::PctDifference => "pct_difference",
            Aggregator::RealizedVolatility => "rv",
            Aggregator::PctGreaterMean => "pct_greater_mean",
            Aggregator::PctLessMean => "pct_less_mean",
            Aggregator::PctGreaterZero => "pct_greater_zero",
            Aggregator::PctLessZero => "pct_less_zero",
            Aggregator::MedianDeviation => "median_deviation",
            Aggregator::Energy => "energy",
            Aggregator::Iqr => "iqr",
            Aggregator::MeanFirst100 => "mean_first_100",
            Aggregator::MeanLast100 => "mean_last_100",
        }
    }

    /// True when reordering the input can change the result.
    pub fn is_order_dependent(self) -> bool {
        matches!(
            self,
            Aggregator::PctDifference
                | Aggregator::RealizedVolatility
                | Aggregator::MeanFirst100
                | Aggregator::MeanLast100
        )
    }
}

fn mean(a: &[f64]) -> f64 {
    a.iter().sum::<f64>() / a.len() as f64
}

fn sorted(a: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear interpolation between order statistics of a sorted slice.
fn percentile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn median_sorted(v: &[f64]) -> f64 {
    percentile_sorted(v, 0.5)
}

fn fraction(a: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    a.iter().filter(|&&x| pred(x)).count() as f64 / a.len() as f64
}

/// Applies `agg` to a plain series, treating element indices as offsets.
pub fn aggregate(series: &[f64], agg: Aggregator) -> f64 {
    match agg {
        Aggregator::MeanFirst100 => aggregate(&series[..series.len().min(100)], Aggregator::Mean),
        Aggregator::MeanLast100 => {
            aggregate(&series[series.len().saturating_sub(100)..], Aggregator::Mean)
        }
        _ => aggregate_values(series, agg),
    }
}

fn aggregate_values(a: &[f64], agg: Aggregator) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    match agg {
        Aggregator::Mean | Aggregator::MeanFirst100 | Aggregator::MeanLast100 => mean(a),
        Aggregator::Std => {
            let m = mean(a);
            (a.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
        }
        Aggregator::Sum => a.iter().sum(),
        Aggregator::Max => a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregator::Count => n,
        Aggregator::Gini => {
            let m = mean(a);
            if m == 0.0 {
                return 0.0;
            }
            // sum_{i,j} |a_i - a_j| = 2 * sum_k (2k - n - 1) a_(k), 1-based ranks
            let v = sorted(a);
            let weighted: f64 = v
                .iter()
                .enumerate()
                .map(|(k, x)| (2.0 * (k as f64 + 1.0) - n - 1.0) * x)
                .sum();
            2.0 * weighted / (2.0 * n * n * m)
        }
        Aggregator::PctDifference => {
            a.windows(2).filter(|w| w[1] != w[0]).count() as f64 / n
        }
        Aggregator::RealizedVolatility => (a.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        Aggregator::PctGreaterMean => {
            let m = mean(a);
            fraction(a, |x| x > m)
        }
        Aggregator::PctLessMean => {
            let m = mean(a);
            fraction(a, |x| x < m)
        }
        Aggregator::PctGreaterZero => fraction(a, |x| x > 0.0),
        Aggregator::PctLessZero => fraction(a, |x| x < 0.0),
        Aggregator::MedianDeviation => {
            let m = mean(a);
            let dev: Vec<f64> = a.iter().map(|x| (x - m).abs()).collect();
            median_sorted(&sorted(&dev))
        }
        Aggregator::Energy => a.iter().map(|x| x * x).sum::<f64>() / n,
        Aggregator::Iqr => {
            let v = sorted(a);
            percentile_sorted(&v, 0.75) - percentile_sorted(&v, 0.25)
        }
    }
}

/// A window of indicator values with their offsets (seconds since the
/// window start). Offsets are nondecreasing.
#[derive(Debug, Clone, Copy)]
pub struct Windowed<'a> {
    pub values: &'a [f64],
    pub offsets: &'a [u32],
    pub len: u32,
}

impl<'a> Windowed<'a> {
    pub fn new(values: &'a [f64], offsets: &'a [u32], len: u32) -> Self {
        debug_assert_eq!(values.len(), offsets.len());
        Self {
            values,
            offsets,
            len,
        }
    }

    /// Values whose offset is strictly below `end`.
    pub fn prefix(&self, end: u32) -> &'a [f64] {
        &self.values[..self.offsets.partition_point(|&o| o < end)]
    }

    /// Values whose offset is at least `start`.
    pub fn suffix(&self, start: u32) -> &'a [f64] {
        &self.values[self.offsets.partition_point(|&o| o < start)..]
    }

    pub fn aggregate(&self, agg: Aggregator) -> f64 {
        match agg {
            Aggregator::MeanFirst100 => aggregate_values(self.prefix(EDGE_WINDOW), Aggregator::Mean),
            Aggregator::MeanLast100 => aggregate_values(
                self.suffix(self.len.saturating_sub(EDGE_WINDOW)),
                Aggregator::Mean,
            ),
            _ => aggregate_values(self.values, agg),
        }
    }

    /// `agg` over the six nested prefixes ending at `k * len / 6`.
    pub fn progressive(&self, agg: Aggregator) -> Result<[f64; PROGRESSIVE_STEPS]> {
        if self.len == 0 || self.len % PROGRESSIVE_STEPS as u32 != 0 {
            return Err(Error::InvalidInput(format!(
                "progressive features need a window divisible by 6, got {}",
                self.len
            )));
        }
        let step = self.len / PROGRESSIVE_STEPS as u32;
        let mut out = [0.0; PROGRESSIVE_STEPS];
        for (k, slot) in out.iter_mut().enumerate() {
            let end = step * (k as u32 + 1);
            let sub = Windowed {
                values: self.prefix(end),
                offsets: &self.offsets[..self.prefix(end).len()],
                len: end,
            };
            *slot = sub.aggregate(agg);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gini_examples() {
        assert_eq!(aggregate(&[3.5, 3.5, 3.5], Aggregator::Gini), 0.0);
        assert!((aggregate(&[0.0, 1.0], Aggregator::Gini) - 0.5).abs() < 1e-15);
        assert_eq!(aggregate(&[-1.0, 1.0], Aggregator::Gini), 0.0);
    }

    #[test]
    fn scalar_examples() {
        assert!((aggregate(&[1.0, 2.0, 2.0], Aggregator::Energy) - 3.0).abs() < 1e-15);
        assert_eq!(
            aggregate(&[-1.0, 2.0, 3.0, 0.0], Aggregator::PctGreaterZero),
            0.5
        );
        assert_eq!(aggregate(&[-1.0, 2.0, 3.0, 0.0], Aggregator::PctLessZero), 0.25);
        assert!((aggregate(&[1.0, 2.0, 3.0, 4.0], Aggregator::Iqr) - 1.5).abs() < 1e-15);
        // 1 -> 1 -> 2 -> 2 -> 3: two changes over five rows
        assert_eq!(
            aggregate(&[1.0, 1.0, 2.0, 2.0, 3.0], Aggregator::PctDifference),
            0.4
        );
        assert_eq!(aggregate(&[5.0], Aggregator::PctDifference), 0.0);
        assert!((aggregate(&[3.0, 4.0], Aggregator::RealizedVolatility) - 12.5f64.sqrt()).abs() < 1e-15);
        // mean 2, deviations 1,0,1,... median of [1, 0, 1] = 1
        assert_eq!(aggregate(&[1.0, 2.0, 3.0], Aggregator::MedianDeviation), 1.0);
    }

    #[test]
    fn empty_series_is_zero_everywhere() {
        for agg in Aggregator::ALL {
            assert_eq!(aggregate(&[], agg), 0.0, "{agg:?}");
        }
    }

    #[test]
    fn positional_means_use_offsets() {
        let values = [1.0, 2.0, 3.0, 4.0];
        let offsets = [10, 99, 100, 550];
        let w = Windowed::new(&values, &offsets, 600);
        assert_eq!(w.aggregate(Aggregator::MeanFirst100), 1.5);
        assert_eq!(w.aggregate(Aggregator::MeanLast100), 4.0);
        let none_late = Windowed::new(&values[..2], &offsets[..2], 600);
        assert_eq!(none_late.aggregate(Aggregator::MeanLast100), 0.0);
    }

    #[test]
    fn progressive_prefix_boundaries() {
        let values: Vec<f64> = (0..600).map(|i| i as f64).collect();
        let offsets: Vec<u32> = (0..600).collect();
        let w = Windowed::new(&values, &offsets, 600);
        let counts = w.progressive(Aggregator::Count).unwrap();
        assert_eq!(counts, [100.0, 200.0, 300.0, 400.0, 500.0, 600.0]);
        let flat = vec![2.0; 600];
        let c = Windowed::new(&flat, &offsets, 600).progressive(Aggregator::Mean).unwrap();
        assert!(c.iter().all(|&x| x == 2.0));
        assert!(Windowed::new(&values, &offsets, 601).progressive(Aggregator::Sum).is_err());
    }

    #[test]
    fn progressive_matches_recomputation() {
        // deterministic pseudo-random sparse window
        let mut offsets = Vec::new();
        let mut values = Vec::new();
        let mut x: u64 = 0x9E3779B97F4A7C15;
        for s in 0..1200u32 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            if x % 3 == 0 {
                offsets.push(s);
                values.push((x % 1000) as f64 / 37.0 - 10.0);
            }
        }
        let w = Windowed::new(&values, &offsets, 1200);
        for agg in [Aggregator::Sum, Aggregator::RealizedVolatility, Aggregator::Gini, Aggregator::Iqr] {
            let p = w.progressive(agg).unwrap();
            for k in 0..6 {
                let end = 200 * (k as u32 + 1);
                let sub: Vec<f64> = offsets
                    .iter()
                    .zip(&values)
                    .filter(|(o, _)| **o < end)
                    .map(|(_, v)| *v)
                    .collect();
                assert_eq!(p[k], aggregate(&sub, agg), "{agg:?} prefix {k}");
            }
        }
    }

    proptest! {
        #[test]
        fn gini_in_unit_interval(xs in proptest::collection::vec(0.0f64..100.0, 1..80)) {
            let g = aggregate(&xs, Aggregator::Gini);
            if xs.iter().sum::<f64>() > 0.0 {
                prop_assert!((0.0..1.0).contains(&g), "gini {g}");
            }
        }

        #[test]
        fn pct_mean_sides(xs in proptest::collection::vec(-5i32..5, 1..60)) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let gt = aggregate(&xs, Aggregator::PctGreaterMean);
            let lt = aggregate(&xs, Aggregator::PctLessMean);
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let ties = xs.iter().any(|&x| x == m);
            prop_assert!(gt + lt <= 1.0 + 1e-12);
            prop_assert_eq!((gt + lt - 1.0).abs() < 1e-12, !ties);
        }

        #[test]
        fn scaling_behaviour(xs in proptest::collection::vec(0.1f64..50.0, 2..60), lambda in 0.1f64..20.0) {
            let ys: Vec<f64> = xs.iter().map(|x| x * lambda).collect();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
            for agg in [Aggregator::Mean, Aggregator::Std, Aggregator::MedianDeviation, Aggregator::Iqr] {
                prop_assert!(close(aggregate(&ys, agg), lambda * aggregate(&xs, agg)), "{:?}", agg);
            }
            prop_assert!(close(aggregate(&ys, Aggregator::Energy), lambda * lambda * aggregate(&xs, Aggregator::Energy)));
            for agg in [Aggregator::Gini, Aggregator::PctGreaterMean, Aggregator::PctLessMean, Aggregator::PctGreaterZero, Aggregator::PctLessZero] {
                prop_assert!(close(aggregate(&ys, agg), aggregate(&xs, agg)), "{:?}", agg);
            }
        }

        #[test]
        fn order_independent_aggregators(xs in proptest::collection::vec(-20.0f64..20.0, 1..60)) {
            let mut rev = xs.clone();
            rev.reverse();
            for agg in Aggregator::ALL.into_iter().filter(|a| !a.is_order_dependent()) {
                let a = aggregate(&xs, agg);
                let b = aggregate(&rev, agg);
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{:?}: {} vs {}", agg, a, b);
            }
        }
    }

    #[test]
    fn order_dependent_aggregators_can_change() {
        let xs: Vec<f64> = (0..150).map(|i| if i < 120 { 1.0 } else { (i % 2) as f64 * 5.0 }).collect();
        let mut perm = xs.clone();
        perm.sort_by(f64::total_cmp);
        for agg in Aggregator::ALL.into_iter().filter(|a| a.is_order_dependent()) {
            if agg == Aggregator::RealizedVolatility {
                continue; // sum of squares: order only matters through rounding
            }
            assert_ne!(aggregate(&xs, agg), aggregate(&perm, agg), "{agg:?}");
        }
    }
}
