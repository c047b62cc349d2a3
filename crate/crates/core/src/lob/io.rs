//! Delimited text formats for raw events and sampled rows.
//!
//! One file per day and per kind. Column layouts:
//!
//! | kind           | columns                                                       |
//! |----------------|---------------------------------------------------------------|
//! | raw quotes     | `Date,Symbol,time,bid_price,bid_size,ask_price,ask_size`      |
//! | raw trades     | `Date,Symbol,time,price,size`                                 |
//! | sampled quotes | `Date,Symbol,seconds,bid_price,bid_size,ask_price,ask_size`   |
//! | sampled trades | `Date,Symbol,seconds,trade_count,volume,vwap`                 |
//!
//! `Date` is written as `M/D/YYYY`; ISO `YYYY-MM-DD` is also accepted on
//! read. `time` is fractional seconds after the open, `seconds` its floor.
//! Rows of one symbol must appear in time order.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{QuoteEvent, QuoteRow, TradeEvent, TradeRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableFormat {
    pub delimiter: u8,
}

impl Default for TableFormat {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// Rows of one file, grouped by symbol in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct DayTable<T> {
    pub date: NaiveDate,
    pub by_symbol: BTreeMap<String, Vec<T>>,
}

pub fn format_date(date: NaiveDate) -> String {
    date.format("%-m/%-d/%Y").to_string()
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%m/%d/%Y")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .map_err(|_| Error::Data(format!("unparseable date {s:?}")))
}

pub fn raw_quotes_file(date: NaiveDate) -> String {
    format!("quotes_raw_{}.csv", date.format("%Y-%m-%d"))
}

pub fn raw_trades_file(date: NaiveDate) -> String {
    format!("trades_raw_{}.csv", date.format("%Y-%m-%d"))
}

pub fn quotes_file(date: NaiveDate) -> String {
    format!("quotes_{}.csv", date.format("%Y-%m-%d"))
}

pub fn trades_file(date: NaiveDate) -> String {
    format!("trades_{}.csv", date.format("%Y-%m-%d"))
}

#[derive(Serialize, Deserialize)]
struct RawQuoteRecord {
    #[serde(rename = "Date")]
    date: String,
    #[serde(rename = "Symbol")]
    symbol: String,
    time: f64,
    bid_price: f64,
    bid_size: u32,
    ask_price: f64,
    ask_size: u32,
}

#[derive(Serialize, Deserialize)]
struct RawTradeRecord {
    #[serde(rename = "Date")]
    date: String,
    #[serde(rename = "Symbol")]
    symbol: String,
    time: f64,
    price: f64,
    size: u32,
}

#[derive(Serialize, Deserialize)]
struct QuoteRecord {
    #[serde(rename = "Date")]
    date: String,
    #[serde(rename = "Symbol")]
    symbol: String,
    seconds: u32,
    bid_price: f64,
    bid_size: u32,
    ask_price: f64,
    ask_size: u32,
}

#[derive(Serialize, Deserialize)]
struct TradeRecord {
    #[serde(rename = "Date")]
    date: String,
    #[serde(rename = "Symbol")]
    symbol: String,
    seconds: u32,
    trade_count: u32,
    volume: u64,
    vwap: f64,
}

fn write_records<R: Serialize>(
    path: &Path,
    format: TableFormat,
    records: impl Iterator<Item = R>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(format.delimiter)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_records<R, T>(
    path: &Path,
    format: TableFormat,
    split: impl Fn(R) -> (String, String, T),
) -> Result<DayTable<T>>
where
    R: for<'de> Deserialize<'de>,
{
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut date: Option<(String, NaiveDate)> = None;
    let mut by_symbol: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for rec in rdr.deserialize::<R>() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let (d, symbol, row) = split(rec);
        match &date {
            Some((raw, _)) if *raw == d => {}
            Some((_, parsed)) => {
                if parse_date(&d)? != *parsed {
                    return Err(Error::Data(format!(
                        "{}: mixes dates {} and {d}",
                        path.display(),
                        parsed
                    )));
                }
            }
            None => date = Some((d.clone(), parse_date(&d)?)),
        }
        by_symbol.entry(symbol).or_default().push(row);
    }
    let date = date
        .map(|(_, d)| d)
        .ok_or_else(|| Error::Data(format!("{}: no rows", path.display())))?;
    Ok(DayTable { date, by_symbol })
}

pub fn write_raw_quotes<'a>(
    path: &Path,
    format: TableFormat,
    date: NaiveDate,
    entries: impl IntoIterator<Item = (&'a str, &'a [QuoteEvent])>,
) -> Result<()> {
    let d = format_date(date);
    let records = entries.into_iter().flat_map(|(sym, evs)| {
        let d = d.clone();
        evs.iter().map(move |e| RawQuoteRecord {
            date: d.clone(),
            symbol: sym.to_string(),
            time: e.time,
            bid_price: e.bid_price,
            bid_size: e.bid_size,
            ask_price: e.ask_price,
            ask_size: e.ask_size,
        })
    });
    write_records(path, format, records)
}

pub fn read_raw_quotes(path: &Path, format: TableFormat) -> Result<DayTable<QuoteEvent>> {
    read_records(path, format, |r: RawQuoteRecord| {
        (
            r.date,
            r.symbol,
            QuoteEvent {
                time: r.time,
                bid_price: r.bid_price,
                bid_size: r.bid_size,
                ask_price: r.ask_price,
                ask_size: r.ask_size,
            },
        )
    })
}

pub fn write_raw_trades<'a>(
    path: &Path,
    format: TableFormat,
    date: NaiveDate,
    entries: impl IntoIterator<Item = (&'a str, &'a [TradeEvent])>,
) -> Result<()> {
    let d = format_date(date);
    let records = entries.into_iter().flat_map(|(sym, evs)| {
        let d = d.clone();
        evs.iter().map(move |e| RawTradeRecord {
            date: d.clone(),
            symbol: sym.to_string(),
            time: e.time,
            price: e.price,
            size: e.size,
        })
    });
    write_records(path, format, records)
}

pub fn read_raw_trades(path: &Path, format: TableFormat) -> Result<DayTable<TradeEvent>> {
    read_records(path, format, |r: RawTradeRecord| {
        (
            r.date,
            r.symbol,
            TradeEvent {
                time: r.time,
                price: r.price,
                size: r.size,
            },
        )
    })
}

pub fn write_quotes<'a>(
    path: &Path,
    format: TableFormat,
    date: NaiveDate,
    entries: impl IntoIterator<Item = (&'a str, &'a [QuoteRow])>,
) -> Result<()> {
    let d = format_date(date);
    let records = entries.into_iter().flat_map(|(sym, rows)| {
        let d = d.clone();
        rows.iter().map(move |q| QuoteRecord {
            date: d.clone(),
            symbol: sym.to_string(),
            seconds: q.second,
            bid_price: q.bid_price,
            bid_size: q.bid_size,
            ask_price: q.ask_price,
            ask_size: q.ask_size,
        })
    });
    write_records(path, format, records)
}

pub fn read_quotes(path: &Path, format: TableFormat) -> Result<DayTable<QuoteRow>> {
    read_records(path, format, |r: QuoteRecord| {
        (
            r.date,
            r.symbol,
            QuoteRow {
                second: r.seconds,
                bid_price: r.bid_price,
                bid_size: r.bid_size,
                ask_price: r.ask_price,
                ask_size: r.ask_size,
            },
        )
    })
}

pub fn write_trades<'a>(
    path: &Path,
    format: TableFormat,
    date: NaiveDate,
    entries: impl IntoIterator<Item = (&'a str, &'a [TradeRow])>,
) -> Result<()> {
    let d = format_date(date);
    let records = entries.into_iter().flat_map(|(sym, rows)| {
        let d = d.clone();
        rows.iter().map(move |t| TradeRecord {
            date: d.clone(),
            symbol: sym.to_string(),
            seconds: t.second,
            trade_count: t.trade_count,
            volume: t.volume,
            vwap: t.vwap,
        })
    });
    write_records(path, format, records)
}

pub fn read_trades(path: &Path, format: TableFormat) -> Result<DayTable<TradeRow>> {
    read_records(path, format, |r: TradeRecord| {
        (
            r.date,
            r.symbol,
            TradeRow {
                second: r.seconds,
                trade_count: r.trade_count,
                volume: r.volume,
                vwap: r.vwap,
            },
        )
    })
}
