//! Intraday volatility forecasting on limit order book data with graph
//! transformer networks.

pub mod baselines;
pub mod error;
pub mod features;
pub mod graph;
pub mod harness;
pub mod hashing;
pub mod lob;
pub mod metrics;
pub mod model;

pub use error::{Error, ErrorKind, Result};
