//! One-second sampling of raw quote and trade events.

use serde::{Deserialize, Serialize};

use super::{QuoteRow, TradeRow, SESSION_SECONDS};
use crate::error::{Error, Result};

/// A best bid/ask update at a fractional time (seconds after the open).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteEvent {
    pub time: f64,
    pub bid_price: f64,
    pub bid_size: u32,
    pub ask_price: f64,
    pub ask_size: u32,
}

/// A single print.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeEvent {
    pub time: f64,
    pub price: f64,
    pub size: u32,
}

/// Counters for events rejected during sampling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    pub accepted: usize,
    pub crossed: usize,
    pub invalid: usize,
    pub out_of_session: usize,
}

impl SampleStats {
    pub fn rejected(&self) -> usize {
        self.crossed + self.invalid + self.out_of_session
    }

    pub fn merge(&mut self, other: &SampleStats) {
        self.accepted += other.accepted;
        self.crossed += other.crossed;
        self.invalid += other.invalid;
        self.out_of_session += other.out_of_session;
    }
}

fn second_of(time: f64) -> Option<u32> {
    if time.is_finite() && time >= 0.0 && time < SESSION_SECONDS as f64 {
        Some(time.floor() as u32)
    } else {
        None
    }
}

fn check_monotone<I: Iterator<Item = f64>>(times: I) -> Result<()> {
    let mut last = f64::NEG_INFINITY;
    for t in times {
        if t < last {
            return Err(Error::InvalidInput(format!(
                "event timestamps not monotone: {t} after {last}"
            )));
        }
        last = t;
    }
    Ok(())
}

/// Snapshot of the book at the end of each second that saw an update.
///
/// Crossed books (ask below bid), non-positive prices and empty sides are
/// dropped and counted; the row for that second keeps the last valid update.
pub fn sample_quotes(events: &[QuoteEvent]) -> Result<(Vec<QuoteRow>, SampleStats)> {
    check_monotone(events.iter().map(|e| e.time))?;
    let mut stats = SampleStats::default();
    let mut rows: Vec<QuoteRow> = Vec::new();
    for e in events {
        let Some(second) = second_of(e.time) else {
            stats.out_of_session += 1;
            continue;
        };
        if !(e.bid_price > 0.0 && e.bid_price.is_finite() && e.ask_price.is_finite())
            || e.bid_size == 0
            || e.ask_size == 0
        {
            stats.invalid += 1;
            continue;
        }
        if e.ask_price < e.bid_price {
            stats.crossed += 1;
            continue;
        }
        stats.accepted += 1;
        let row = QuoteRow {
            second,
            bid_price: e.bid_price,
            bid_size: e.bid_size,
            ask_price: e.ask_price,
            ask_size: e.ask_size,
        };
        match rows.last_mut() {
            Some(last) if last.second == second => *last = row,
            _ => rows.push(row),
        }
    }
    if stats.rejected() > 0 {
        log::warn!(
            "quote sampling rejected {} events ({} crossed)",
            stats.rejected(),
            stats.crossed
        );
    }
    Ok((rows, stats))
}

/// Per-second trade aggregates: count, summed shares and VWAP.
pub fn sample_trades(events: &[TradeEvent]) -> Result<(Vec<TradeRow>, SampleStats)> {
    check_monotone(events.iter().map(|e| e.time))?;
    let mut stats = SampleStats::default();
    let mut rows: Vec<TradeRow> = Vec::new();
    // running sum of price * size for the open row
    let mut notional = 0.0;
    for e in events {
        let Some(second) = second_of(e.time) else {
            stats.out_of_session += 1;
            continue;
        };
        if e.size == 0 || !(e.price > 0.0 && e.price.is_finite()) {
            stats.invalid += 1;
            continue;
        }
        stats.accepted += 1;
        match rows.last_mut() {
            Some(last) if last.second == second => {
                last.trade_count += 1;
                last.volume += e.size as u64;
                notional += e.price * e.size as f64;
                last.vwap = notional / last.volume as f64;
            }
            _ => {
                notional = e.price * e.size as f64;
                rows.push(TradeRow {
                    second,
                    trade_count: 1,
                    volume: e.size as u64,
                    vwap: e.price,
                });
            }
        }
    }
    if stats.rejected() > 0 {
        log::warn!("trade sampling rejected {} events", stats.rejected());
    }
    Ok((rows, stats))
}
