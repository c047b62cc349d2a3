//! Limit order book ingestion: one-second sampling, returns, realized
//! volatility and bucket construction.
//!
//! Only the first level of the book is used. Sampled rows are sparse in
//! time: a second without a quote update or a trade simply has no row.

pub mod bucket;
pub mod io;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bucket::{build_buckets, Bucket, BucketBatch, BucketWindow, DropReason, DroppedBucket};
pub use sampling::{sample_quotes, sample_trades, QuoteEvent, SampleStats, TradeEvent};

/// Regular session length in seconds (6.5 hours).
pub const SESSION_SECONDS: u32 = 23_400;

/// 10:00, 11:00, ..., 15:00 expressed as seconds after a 09:30 open.
pub const HOURLY_ANCHORS: [u32; 6] = [1800, 5400, 9000, 12600, 16200, 19800];

/// Dense index of a stock inside a universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Ordered list of ticker symbols; position is the [`SymbolId`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Universe {
    symbols: Vec<String>,
}

impl Universe {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for s in &symbols {
            if !seen.insert(s.as_str()) {
                return Err(Error::Data(format!("duplicate symbol {s}")));
            }
        }
        Ok(Self { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<SymbolId> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .map(|i| SymbolId(i as u32))
    }

    pub fn symbol(&self, id: SymbolId) -> &str {
        &self.symbols[id.index()]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

/// Best bid/ask state at the end of one second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteRow {
    pub second: u32,
    pub bid_price: f64,
    pub bid_size: u32,
    pub ask_price: f64,
    pub ask_size: u32,
}

impl QuoteRow {
    /// Size-weighted mid: each side's price is weighted by the opposite size.
    pub fn wap(&self) -> Result<f64> {
        let total = self.bid_size as f64 + self.ask_size as f64;
        if total <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "zero total quote size at second {}",
                self.second
            )));
        }
        Ok((self.bid_price * self.ask_size as f64 + self.ask_price * self.bid_size as f64) / total)
    }
}

/// All trades of one second, aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRow {
    pub second: u32,
    pub trade_count: u32,
    pub volume: u64,
    pub vwap: f64,
}

/// Sampled rows of one stock on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDay {
    pub date: chrono::NaiveDate,
    pub symbol: SymbolId,
    pub quotes: Vec<QuoteRow>,
    pub trades: Vec<TradeRow>,
}

impl SampledDay {
    /// Traded value of the day, sum of vwap times volume.
    pub fn turnover(&self) -> f64 {
        self.trades.iter().map(|t| t.vwap * t.volume as f64).sum()
    }
}

/// Which price series a return series was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriceSource {
    TradeVwap,
    QuoteWap,
}

/// Log returns between consecutive observed prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub source: PriceSource,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn from_prices(prices: &[f64], source: PriceSource) -> Result<Self> {
        let values = prices
            .windows(2)
            .map(|w| log_return(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { source, values })
    }

    pub fn realized_volatility(&self) -> f64 {
        realized_volatility(&self.values)
    }
}

pub fn log_return(p_prev: f64, p_cur: f64) -> Result<f64> {
    if !(p_prev > 0.0 && p_cur > 0.0) || !p_prev.is_finite() || !p_cur.is_finite() {
        return Err(Error::InvalidInput(format!(
            "log return needs positive prices, got {p_prev} -> {p_cur}"
        )));
    }
    Ok((p_cur / p_prev).ln())
}

/// Square root of the sum of squared returns. Empty input gives 0.
pub fn realized_volatility(returns: &[f64]) -> f64 {
    returns.iter().map(|r| r * r).sum::<f64>().sqrt()
}
