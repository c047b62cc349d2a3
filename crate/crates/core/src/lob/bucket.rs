//! Buckets: a backward feature window and a forward target window around an
//! anchor time.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    realized_volatility, PriceSource, QuoteRow, ReturnSeries, SampledDay, SymbolId, TradeRow,
    SESSION_SECONDS,
};
use crate::error::{Error, Result};

/// Backward (feature) and forward (target) window lengths in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketWindow {
    pub backward: u32,
    pub forward: u32,
}

impl BucketWindow {
    pub fn symmetric(seconds: u32) -> Self {
        Self {
            backward: seconds,
            forward: seconds,
        }
    }

    /// Rejects anchors whose windows leave the session or overlap each other.
    pub fn validate(&self, anchors: &[u32]) -> Result<()> {
        if self.backward == 0 || self.forward == 0 {
            return Err(Error::Config("bucket windows must be positive".into()));
        }
        if anchors.is_empty() {
            return Err(Error::Config("no bucket anchors".into()));
        }
        for w in anchors.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(format!(
                    "anchors must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
            if w[0] + self.forward > w[1] - w[1].min(self.backward) {
                return Err(Error::Config(format!(
                    "buckets at {} and {} overlap for windows {}+{}",
                    w[0], w[1], self.backward, self.forward
                )));
            }
        }
        let first = anchors[0];
        let last = *anchors.last().unwrap();
        if first < self.backward || last + self.forward > SESSION_SECONDS {
            return Err(Error::Config(format!(
                "bucket windows must stay inside the {SESSION_SECONDS}s session"
            )));
        }
        Ok(())
    }
}

/// One training unit for a stock at an anchor time.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub symbol: SymbolId,
    pub date: NaiveDate,
    pub anchor: u32,
    pub window: BucketWindow,
    /// Quote rows with second in `[anchor - backward, anchor)`.
    pub quotes: Vec<QuoteRow>,
    /// Trade rows with second in `[anchor - backward, anchor)`.
    pub trades: Vec<TradeRow>,
    /// Realized volatility of trade returns inside `[anchor, anchor + forward)`.
    pub target: f64,
}

impl Bucket {
    pub fn backward_start(&self) -> u32 {
        self.anchor - self.window.backward
    }

    pub fn backward_returns(&self) -> ReturnSeries {
        trade_returns(&self.trades)
    }

    /// Realized volatility of the backward window, the naive forecast.
    pub fn backward_rv(&self) -> f64 {
        self.backward_returns().realized_volatility()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoBackwardQuotes,
    NoBackwardTrades,
    NoForwardQuotes,
    NoForwardTrades,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedBucket {
    pub symbol: SymbolId,
    pub date: NaiveDate,
    pub anchor: u32,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BucketBatch {
    pub buckets: Vec<Bucket>,
    pub dropped: Vec<DroppedBucket>,
}

impl BucketBatch {
    pub fn extend(&mut self, other: BucketBatch) {
        self.buckets.extend(other.buckets);
        self.dropped.extend(other.dropped);
    }
}

fn range_of<T>(rows: &[T], second: impl Fn(&T) -> u32, lo: u32, hi: u32) -> &[T] {
    let a = rows.partition_point(|r| second(r) < lo);
    let b = rows.partition_point(|r| second(r) < hi);
    &rows[a..b]
}

/// Log returns between consecutive observed trade seconds (no gap filling).
pub(crate) fn trade_returns(trades: &[TradeRow]) -> ReturnSeries {
    // vwap is positive by construction of sampled rows
    let values = trades
        .windows(2)
        .map(|w| (w[1].vwap / w[0].vwap).ln())
        .collect();
    ReturnSeries {
        source: PriceSource::TradeVwap,
        values,
    }
}

/// Cuts one sampled stock-day into buckets at the given anchors.
///
/// A bucket is dropped when either window lacks quote rows or trade rows.
pub fn build_buckets(
    day: &SampledDay,
    anchors: &[u32],
    window: BucketWindow,
) -> Result<BucketBatch> {
    window.validate(anchors)?;
    let mut batch = BucketBatch::default();
    for &anchor in anchors {
        let start = anchor - window.backward;
        let end = anchor + window.forward;
        let bq = range_of(&day.quotes, |q| q.second, start, anchor);
        let bt = range_of(&day.trades, |t| t.second, start, anchor);
        let fq = range_of(&day.quotes, |q| q.second, anchor, end);
        let ft = range_of(&day.trades, |t| t.second, anchor, end);
        let reason = if bq.is_empty() {
            Some(DropReason::NoBackwardQuotes)
        } else if bt.is_empty() {
            Some(DropReason::NoBackwardTrades)
        } else if fq.is_empty() {
            Some(DropReason::NoForwardQuotes)
        } else if ft.is_empty() {
            Some(DropReason::NoForwardTrades)
        } else {
            None
        };
        if let Some(reason) = reason {
            batch.dropped.push(DroppedBucket {
                symbol: day.symbol,
                date: day.date,
                anchor,
                reason,
            });
            continue;
        }
        let target = realized_volatility(&trade_returns(ft).values);
        batch.buckets.push(Bucket {
            symbol: day.symbol,
            date: day.date,
            anchor,
            window,
            quotes: bq.to_vec(),
            trades: bt.to_vec(),
            target,
        });
    }
    Ok(batch)
}
