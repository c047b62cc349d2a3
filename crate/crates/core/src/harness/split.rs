//! Chronological train/validation/test split by trading day.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::config::SplitConfig;
use crate::error::{Error, Result};

/// First day of validation and of test. Days before `val_start` train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundaries {
    pub val_start: NaiveDate,
    pub test_start: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    pub fn name(self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        }
    }
}

/// Record indices of each part, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub boundaries: Boundaries,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn part(&self, p: Part) -> &[usize] {
        match p {
            Part::Train => &self.train,
            Part::Val => &self.val,
            Part::Test => &self.test,
        }
    }

    /// Fractions of buckets in train, val and test.
    pub fn proportions(&self) -> [f64; 3] {
        let total = (self.train.len() + self.val.len() + self.test.len()).max(1) as f64;
        [self.train.len(), self.val.len(), self.test.len()].map(|c| c as f64 / total)
    }
}

/// Boundaries from explicit dates, else from day fractions of `dates`.
pub fn boundaries(cfg: &SplitConfig, dates: &[NaiveDate]) -> Result<Boundaries> {
    if dates.is_empty() {
        return Err(Error::Data("no trading days".into()));
    }
    let m = dates.len();
    let at = |frac: f64| dates[((frac * m as f64).round() as usize).min(m - 1)];
    let val_start = cfg.val_start.unwrap_or_else(|| at(cfg.train_fraction));
    let test_start = cfg
        .test_start
        .unwrap_or_else(|| at(cfg.train_fraction + cfg.val_fraction));
    if val_start > test_start {
        return Err(Error::Config(format!(
            "validation start {val_start} is after test start {test_start}"
        )));
    }
    Ok(Boundaries {
        val_start,
        test_start,
    })
}

/// Assigns each bucket date to a part. An empty train part is an error; an
/// empty validation or test part is logged.
pub fn split_chronological(dates: impl IntoIterator<Item = NaiveDate>, b: Boundaries) -> Result<Split> {
    if b.val_start > b.test_start {
        return Err(Error::Config("split boundaries out of order".into()));
    }
    let mut split = Split {
        boundaries: b,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (i, d) in dates.into_iter().enumerate() {
        if d < b.val_start {
            split.train.push(i);
        } else if d < b.test_start {
            split.val.push(i);
        } else {
            split.test.push(i);
        }
    }
    if split.train.is_empty() {
        return Err(Error::Config(format!("no buckets before {}", b.val_start)));
    }
    for (name, part) in [("validation", &split.val), ("test", &split.test)] {
        if part.is_empty() {
            log::warn!("{name} split is empty");
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn days(m: usize) -> Vec<NaiveDate> {
        let d0 = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        (0..m as u64).map(|i| d0 + chrono::Days::new(i)).collect()
    }

    #[test]
    fn default_fractions_on_sixty_days() {
        let dates = days(60);
        let b = boundaries(&SplitConfig::default(), &dates).unwrap();
        let per_bucket: Vec<NaiveDate> = dates.iter().flat_map(|&d| std::iter::repeat(d).take(6 * 30)).collect();
        let s = split_chronological(per_bucket, b).unwrap();
        let [tr, va, te] = s.proportions();
        assert!((tr - 0.61).abs() <= 0.05 && (va - 0.21).abs() <= 0.05 && (te - 0.18).abs() <= 0.05, "{tr} {va} {te}");
    }

    #[test]
    fn everything_before_first_boundary() {
        let dates = days(5);
        let late = NaiveDate::from_ymd_opt(2030, 1, 1).unwrap();
        let s = split_chronological(
            dates,
            Boundaries {
                val_start: late,
                test_start: late,
            },
        )
        .unwrap();
        assert_eq!(s.train.len(), 5);
        assert!(s.val.is_empty() && s.test.is_empty());

        let early = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let err = split_chronological(
            days(5),
            Boundaries {
                val_start: early,
                test_start: early,
            },
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn train_precedes_val_precedes_test(m in 3usize..80, tf in 0.1f64..0.7, vf in 0.0f64..0.25) {
            let dates = days(m);
            let cfg = SplitConfig { train_fraction: tf, val_fraction: vf, ..SplitConfig::default() };
            let b = boundaries(&cfg, &dates).unwrap();
            if let Ok(s) = split_chronological(dates.clone(), b) {
                let max_train = s.train.iter().map(|&i| dates[i]).max().unwrap();
                for &i in s.val.iter().chain(&s.test) {
                    prop_assert!(dates[i] > max_train);
                }
                if let Some(max_val) = s.val.iter().map(|&i| dates[i]).max() {
                    prop_assert!(s.test.iter().all(|&i| dates[i] > max_val));
                }
                prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), m);
            }
        }
    }
}
