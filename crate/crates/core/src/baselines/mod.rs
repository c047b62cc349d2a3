//! Reference forecasters: backward realized volatility, HAR regression and a
//! feed-forward network.

pub mod har;
pub mod mlp;

pub use har::{har_fit, har_lags, HarLags, HarObservation, HarParams, HarRow};
pub use mlp::{MlpConfig, MlpModel};

use crate::lob::Bucket;

/// Realized volatility of the backward window; 0 when it holds a single
/// trade row.
pub fn naive_guess(bucket: &Bucket) -> f64 {
    let r = bucket.backward_returns();
    if r.values.is_empty() {
        log::debug!(
            "no backward returns for symbol {} at {} {}",
            bucket.symbol.0,
            bucket.date,
            bucket.anchor
        );
        return 0.0;
    }
    r.realized_volatility()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lob::{BucketWindow, QuoteRow, SymbolId, TradeRow};
    use chrono::NaiveDate;

    fn bucket(prices: &[f64], forward_target: f64) -> Bucket {
        Bucket {
            symbol: SymbolId(0),
            date: NaiveDate::from_ymd_opt(2020, 5, 4).unwrap(),
            anchor: 1800,
            window: BucketWindow::symmetric(600),
            quotes: vec![QuoteRow {
                second: 1200,
                bid_price: 9.9,
                bid_size: 1,
                ask_price: 10.1,
                ask_size: 1,
            }],
            trades: prices
                .iter()
                .enumerate()
                .map(|(i, &p)| TradeRow {
                    second: 1200 + i as u32,
                    trade_count: 1,
                    volume: 10,
                    vwap: p,
                })
                .collect(),
            target: forward_target,
        }
    }

    #[test]
    fn examples() {
        assert_eq!(naive_guess(&bucket(&[10.0, 10.0, 10.0], 0.1)), 0.0);
        let p0 = 10.0;
        let p1 = p0 * 0.3f64.exp();
        let p2 = p1 * 0.4f64.exp();
        assert!((naive_guess(&bucket(&[p0, p1, p2], 0.0)) - 0.5).abs() < 1e-12);
        assert_eq!(
            naive_guess(&bucket(&[p0, p1, p2], 0.0)),
            naive_guess(&bucket(&[p0, p1, p2], 9.0))
        );
        assert_eq!(naive_guess(&bucket(&[p0], 0.2)), 0.0);
    }
}
