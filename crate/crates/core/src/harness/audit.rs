//! Leakage audit: the latest market-data second each training artifact read.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// A trading date and a second after the open.
pub type Stamp = (NaiveDate, u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub artifact: String,
    /// `None` when the artifact read no data.
    pub max_timestamp: Option<Stamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakAudit {
    /// First second of data that belongs to the test period.
    pub test_start: Option<Stamp>,
    pub entries: Vec<AuditEntry>,
}

impl LeakAudit {
    pub fn new(test_start: Option<Stamp>) -> Self {
        Self {
            test_start,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, artifact: impl Into<String>, stamps: impl IntoIterator<Item = Stamp>) {
        self.entries.push(AuditEntry {
            artifact: artifact.into(),
            max_timestamp: stamps.into_iter().max(),
        });
    }

    pub fn max_timestamp(&self) -> Option<Stamp> {
        self.entries.iter().filter_map(|e| e.max_timestamp).max()
    }

    /// Artifacts that read data at or after the test start.
    pub fn violations(&self) -> Vec<&AuditEntry> {
        match self.test_start {
            None => Vec::new(),
            Some(start) => self
                .entries
                .iter()
                .filter(|e| e.max_timestamp.is_some_and(|m| m >= start))
                .collect(),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations().is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violations_compare_against_test_start() {
        let d = |day| NaiveDate::from_ymd_opt(2021, 3, day).unwrap();
        let mut a = LeakAudit::new(Some((d(10), 1200)));
        a.record("standardizer", [(d(1), 1799), (d(9), 19799)]);
        a.record("empty", []);
        assert!(a.is_clean());
        a.record("graph", [(d(10), 1200)]);
        assert_eq!(a.violations().len(), 1);
        assert_eq!(a.max_timestamp(), Some((d(10), 1200)));
    }
}
