//! Bucket encoder: 33 quote-side and 40 trade-side features.

use chrono::NaiveDate;

use super::aggregate::{Aggregator, Windowed, PROGRESSIVE_STEPS};
use crate::error::{Error, Result};
use crate::lob::{Bucket, SymbolId};

/// Number of numeric features per bucket.
pub const NUM_FEATURES: usize = 73;

/// Stable column names, in encoding order.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "quote_wap_mean",
    "quote_wap_std",
    "quote_wap_gini",
    "quote_wap_mean_first_100",
    "quote_wap_mean_last_100",
    "quote_ask_price_pct_difference",
    "quote_bid_price_pct_difference",
    "quote_price_rel_spread_mean",
    "quote_price_rel_spread_std",
    "quote_price_rel_spread_gini",
    "quote_wap_bid_diff_mean",
    "quote_wap_bid_diff_std",
    "quote_wap_bid_diff_gini",
    "quote_return_rv_p1",
    "quote_return_rv_p2",
    "quote_return_rv_p3",
    "quote_return_rv_p4",
    "quote_return_rv_p5",
    "quote_return_rv_p6",
    "quote_sq_return_std",
    "quote_sq_return_gini",
    "quote_size_rel_spread_mean",
    "quote_size_rel_spread_std",
    "quote_size_rel_spread_gini",
    "quote_ask_size_pct_difference",
    "quote_bid_size_pct_difference",
    "quote_norm_ask_size_mean",
    "quote_norm_ask_size_std",
    "quote_norm_ask_size_gini",
    "quote_total_size_sum",
    "quote_total_size_max",
    "quote_size_imbalance_sum",
    "quote_size_imbalance_max",
    "trade_price_pct_greater_mean",
    "trade_price_pct_less_mean",
    "trade_price_median_deviation",
    "trade_price_energy",
    "trade_price_iqr",
    "trade_return_rv_p1",
    "trade_return_rv_p2",
    "trade_return_rv_p3",
    "trade_return_rv_p4",
    "trade_return_rv_p5",
    "trade_return_rv_p6",
    "trade_return_pct_greater_zero",
    "trade_return_pct_less_zero",
    "trade_sq_return_std",
    "trade_sq_return_gini",
    "trade_size_sum_p1",
    "trade_size_sum_p2",
    "trade_size_sum_p3",
    "trade_size_sum_p4",
    "trade_size_sum_p5",
    "trade_size_sum_p6",
    "trade_size_max",
    "trade_size_median_deviation",
    "trade_size_energy",
    "trade_size_iqr",
    "trade_seconds_count_p1",
    "trade_seconds_count_p2",
    "trade_seconds_count_p3",
    "trade_seconds_count_p4",
    "trade_seconds_count_p5",
    "trade_seconds_count_p6",
    "trade_order_count_sum_p1",
    "trade_order_count_sum_p2",
    "trade_order_count_sum_p3",
    "trade_order_count_sum_p4",
    "trade_order_count_sum_p5",
    "trade_order_count_sum_p6",
    "trade_order_count_max",
    "trade_amount_sum",
    "trade_amount_max",
];

/// Column of the average WAP over the first 100 seconds of the window.
pub const WAP_FIRST_100: usize = 3;
/// Column of the average WAP over the last 100 seconds of the window.
pub const WAP_LAST_100: usize = 4;

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

/// Encoded bucket: numeric features plus the categorical stock id.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeature {
    pub symbol: SymbolId,
    pub date: NaiveDate,
    pub anchor: u32,
    pub values: [f64; NUM_FEATURES],
    pub target: f64,
    /// Aggregations that saw an empty (sub-)window and were imputed with 0.
    pub imputed: u32,
}

struct Sink {
    values: Vec<f64>,
    imputed: u32,
}

impl Sink {
    fn push(&mut self, w: &Windowed<'_>, aggs: &[Aggregator]) {
        for &agg in aggs {
            let empty = match agg {
                Aggregator::MeanFirst100 => w.prefix(100).is_empty(),
                Aggregator::MeanLast100 => w.suffix(w.len.saturating_sub(100)).is_empty(),
                _ => w.values.is_empty(),
            };
            self.imputed += empty as u32;
            self.values.push(w.aggregate(agg));
        }
    }

    fn push_progressive(&mut self, w: &Windowed<'_>, agg: Aggregator) -> Result<()> {
        let step = w.len / PROGRESSIVE_STEPS as u32;
        for k in 1..=PROGRESSIVE_STEPS as u32 {
            self.imputed += w.prefix(step * k).is_empty() as u32;
        }
        self.values.extend(w.progressive(agg)?);
        Ok(())
    }
}

/// Builds the feature vector for one bucket.
pub fn encode_bucket(b: &Bucket) -> Result<NodeFeature> {
    if b.quotes.is_empty() || b.trades.is_empty() {
        return Err(Error::InvalidInput(format!(
            "bucket {} {} @{} has an empty backward window",
            b.symbol.0, b.date, b.anchor
        )));
    }
    let start = b.backward_start();
    let len = b.window.backward;
    let mut sink = Sink {
        values: Vec::with_capacity(NUM_FEATURES),
        imputed: 0,
    };
    use Aggregator::*;

    // quote side
    let q_off: Vec<u32> = b.quotes.iter().map(|q| q.second - start).collect();
    let col = |f: &dyn Fn(&crate::lob::QuoteRow) -> f64| -> Vec<f64> { b.quotes.iter().map(f).collect() };
    let wap = b
        .quotes
        .iter()
        .map(|q| q.wap())
        .collect::<Result<Vec<f64>>>()?;
    let ask = col(&|q| q.ask_price);
    let bid = col(&|q| q.bid_price);
    let rel_spread = col(&|q| (q.ask_price - q.bid_price) / (q.ask_price + q.bid_price));
    let wap_bid: Vec<f64> = wap.iter().zip(&bid).map(|(w, p)| w - p).collect();
    let ask_size = col(&|q| q.ask_size as f64);
    let bid_size = col(&|q| q.bid_size as f64);
    let size_rel = col(&|q| {
        (q.ask_size as f64 - q.bid_size as f64) / (q.ask_size as f64 + q.bid_size as f64)
    });
    let mean_ask = ask_size.iter().sum::<f64>() / ask_size.len() as f64;
    let norm_ask: Vec<f64> = ask_size.iter().map(|v| v / mean_ask).collect();
    let total_size: Vec<f64> = ask_size.iter().zip(&bid_size).map(|(a, b)| a + b).collect();
    let imbalance: Vec<f64> = ask_size.iter().zip(&bid_size).map(|(a, b)| (a - b).abs()).collect();
    let q_ret: Vec<f64> = wap.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let q_ret_off = &q_off[q_off.len().min(1)..];
    let q_sq: Vec<f64> = q_ret.iter().map(|r| r * r).collect();

    sink.push(&Windowed::new(&wap, &q_off, len), &[Mean, Std, Gini, MeanFirst100, MeanLast100]);
    sink.push(&Windowed::new(&ask, &q_off, len), &[PctDifference]);
    sink.push(&Windowed::new(&bid, &q_off, len), &[PctDifference]);
    sink.push(&Windowed::new(&rel_spread, &q_off, len), &[Mean, Std, Gini]);
    sink.push(&Windowed::new(&wap_bid, &q_off, len), &[Mean, Std, Gini]);
    sink.push_progressive(&Windowed::new(&q_ret, q_ret_off, len), RealizedVolatility)?;
    sink.push(&Windowed::new(&q_sq, q_ret_off, len), &[Std, Gini]);
    sink.push(&Windowed::new(&size_rel, &q_off, len), &[Mean, Std, Gini]);
    sink.push(&Windowed::new(&ask_size, &q_off, len), &[PctDifference]);
    sink.push(&Windowed::new(&bid_size, &q_off, len), &[PctDifference]);
    sink.push(&Windowed::new(&norm_ask, &q_off, len), &[Mean, Std, Gini]);
    sink.push(&Windowed::new(&total_size, &q_off, len), &[Sum, Max]);
    sink.push(&Windowed::new(&imbalance, &q_off, len), &[Sum, Max]);

    // trade side
    let t_off: Vec<u32> = b.trades.iter().map(|t| t.second - start).collect();
    let price: Vec<f64> = b.trades.iter().map(|t| t.vwap).collect();
    let t_ret: Vec<f64> = price.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let t_ret_off = &t_off[t_off.len().min(1)..];
    let t_sq: Vec<f64> = t_ret.iter().map(|r| r * r).collect();
    let size: Vec<f64> = b.trades.iter().map(|t| t.volume as f64).collect();
    let ones = vec![1.0; b.trades.len()];
    let orders: Vec<f64> = b.trades.iter().map(|t| t.trade_count as f64).collect();
    let amount: Vec<f64> = b.trades.iter().map(|t| t.vwap * t.volume as f64).collect();

    sink.push(
        &Windowed::new(&price, &t_off, len),
        &[PctGreaterMean, PctLessMean, MedianDeviation, Energy, Iqr],
    );
    let ret_w = Windowed::new(&t_ret, t_ret_off, len);
    sink.push_progressive(&ret_w, RealizedVolatility)?;
    sink.push(&ret_w, &[PctGreaterZero, PctLessZero]);
    sink.push(&Windowed::new(&t_sq, t_ret_off, len), &[Std, Gini]);
    let size_w = Windowed::new(&size, &t_off, len);
    sink.push_progressive(&size_w, Sum)?;
    sink.push(&size_w, &[Max, MedianDeviation, Energy, Iqr]);
    sink.push_progressive(&Windowed::new(&ones, &t_off, len), Count)?;
    let orders_w = Windowed::new(&orders, &t_off, len);
    sink.push_progressive(&orders_w, Sum)?;
    sink.push(&orders_w, &[Max]);
    sink.push(&Windowed::new(&amount, &t_off, len), &[Sum, Max]);

    debug_assert_eq!(sink.values.len(), NUM_FEATURES);
    let values: [f64; NUM_FEATURES] = sink
        .values
        .try_into()
        .map_err(|_| Error::Numerical("feature count mismatch".into()))?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "feature {} is not finite for {} {} @{}",
            FEATURE_NAMES[i], b.symbol.0, b.date, b.anchor
        )));
    }
    Ok(NodeFeature {
        symbol: b.symbol,
        date: b.date,
        anchor: b.anchor,
        values,
        target: b.target,
        imputed: sink.imputed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::aggregate::aggregate;
    use crate::lob::{BucketWindow, QuoteRow, TradeRow};

    fn bucket(window: u32, wap_const: bool) -> Bucket {
        let anchor = 5400;
        let start = anchor - window;
        let quotes = (start..anchor)
            .step_by(2)
            .enumerate()
            .map(|(i, s)| {
                let mid = if wap_const { 50.0 } else { 50.0 + (i as f64 * 0.3).sin() * 0.1 };
                QuoteRow {
                    second: s,
                    bid_price: mid - 0.02,
                    bid_size: 2 + (i % 3) as u32,
                    ask_price: mid + 0.02,
                    ask_size: 2 + (i % 3) as u32,
                }
            })
            .collect();
        let trades = (start..anchor)
            .step_by(5)
            .enumerate()
            .map(|(i, s)| TradeRow {
                second: s,
                trade_count: 1 + (i % 4) as u32,
                volume: 100 * (1 + (i % 7) as u64),
                vwap: 50.0 + ((i * 7) % 11) as f64 * 0.01,
            })
            .collect();
        Bucket {
            symbol: SymbolId(3),
            date: NaiveDate::from_ymd_opt(2017, 1, 3).unwrap(),
            anchor,
            window: BucketWindow::symmetric(window),
            quotes,
            trades,
            target: 0.01,
        }
    }

    #[test]
    fn emits_73_named_features() {
        assert_eq!(FEATURE_NAMES.len(), 73);
        let unique: std::collections::HashSet<_> = FEATURE_NAMES.iter().collect();
        assert_eq!(unique.len(), 73);
        for window in [600, 1200, 1800] {
            let f = encode_bucket(&bucket(window, false)).unwrap();
            assert_eq!(f.values.len(), NUM_FEATURES);
            assert_eq!(f.imputed, 0);
        }
        assert_eq!(feature_index("quote_wap_mean_first_100"), Some(WAP_FIRST_100));
        assert_eq!(feature_index("quote_wap_mean_last_100"), Some(WAP_LAST_100));
    }

    #[test]
    fn constant_wap_features() {
        let f = encode_bucket(&bucket(600, true)).unwrap();
        let get = |n: &str| f.values[feature_index(n).unwrap()];
        assert_eq!(get("quote_wap_std"), 0.0);
        assert_eq!(get("quote_wap_gini"), 0.0);
        for k in 1..=6 {
            assert_eq!(get(&format!("quote_return_rv_p{k}")), 0.0);
        }
        assert_eq!(get("quote_wap_mean"), 50.0);
        assert!((get("quote_norm_ask_size_mean") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn progressive_counts_follow_window_sixths() {
        let b = bucket(600, false);
        let f = encode_bucket(&b).unwrap();
        // trades every 5 seconds: 20 per 100-second slice
        for k in 1..=6 {
            let v = f.values[feature_index(&format!("trade_seconds_count_p{k}")).unwrap()];
            assert_eq!(v, 20.0 * k as f64);
        }
        let total: f64 = b.trades.iter().map(|t| t.volume as f64).sum();
        assert_eq!(f.values[feature_index("trade_size_sum_p6").unwrap()], total);
        let orders: Vec<f64> = b.trades.iter().map(|t| t.trade_count as f64).collect();
        assert_eq!(
            f.values[feature_index("trade_order_count_max").unwrap()],
            aggregate(&orders, Aggregator::Max)
        );
    }

    #[test]
    fn sparse_prefixes_are_imputed() {
        let mut b = bucket(600, false);
        // keep only trades in the last 100 seconds
        b.trades.retain(|t| t.second >= b.anchor - 100);
        let f = encode_bucket(&b).unwrap();
        assert_eq!(f.values[feature_index("trade_size_sum_p1").unwrap()], 0.0);
        assert!(f.imputed >= 5 * 4);
    }

    #[test]
    fn empty_window_is_an_error() {
        let mut b = bucket(600, false);
        b.trades.clear();
        assert!(matches!(encode_bucket(&b), Err(Error::InvalidInput(_))));
    }
}
