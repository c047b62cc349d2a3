//! Heterogeneous autoregressive regression on intraday realized volatility.
//!
//! With six buckets per day the three horizons are: the backward-window RV
//! of the bucket itself, the mean target of the previous trading day and the
//! mean target over the previous five trading days. One coefficient set is
//! shared by all stocks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarParams {
    pub beta0: f64,
    pub beta_b: f64,
    pub beta_d: f64,
    pub beta_w: f64,
}

/// One bucket as HAR sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarObservation {
    pub symbol: u32,
    /// Ordinal of the trading day in the dataset.
    pub day: usize,
    pub backward_rv: f64,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarLags {
    pub bucket: f64,
    pub daily: f64,
    pub weekly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarRow {
    pub lags: HarLags,
    pub y: f64,
}

const WEEK: usize = 5;

/// Lag regressors per observation, `None` when the previous day or any of
/// the previous five days has no bucket for the stock.
pub fn har_lags(obs: &[HarObservation]) -> Vec<Option<HarLags>> {
    let mut daily: BTreeMap<(u32, usize), (f64, usize)> = BTreeMap::new();
    for o in obs {
        let e = daily.entry((o.symbol, o.day)).or_default();
        e.0 += o.target;
        e.1 += 1;
    }
    obs.iter()
        .map(|o| {
            if o.day < WEEK {
                return None;
            }
            let day_mean = |d: usize| daily.get(&(o.symbol, d)).map(|&(s, n)| (s, n));
            let (ds, dn) = day_mean(o.day - 1)?;
            let (mut ws, mut wn) = (0.0, 0usize);
            for d in o.day - WEEK..o.day {
                let (s, n) = day_mean(d)?;
                ws += s;
                wn += n;
            }
            Some(HarLags {
                bucket: o.backward_rv,
                daily: ds / dn as f64,
                weekly: ws / wn as f64,
            })
        })
        .collect()
}

/// Ordinary least squares; `Ok(None)` when the design is rank deficient.
pub fn har_fit(rows: &[HarRow]) -> Result<Option<HarParams>> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("HAR fit on zero rows".into()));
    }
    let x = DMatrix::from_fn(rows.len(), 4, |i, j| match j {
        0 => 1.0,
        1 => rows[i].lags.bucket,
        2 => rows[i].lags.daily,
        _ => rows[i].lags.weekly,
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.y));
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * rows.len().max(4) as f64;
    if svd.rank(tol) < 4 {
        log::warn!("HAR design is rank deficient; falling back to the naive guess");
        return Ok(None);
    }
    let b = svd
        .solve(&y, tol)
        .map_err(|e| Error::Numerical(format!("HAR solve failed: {e}")))?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite HAR coefficients".into()));
    }
    Ok(Some(HarParams {
        beta0: b[0],
        beta_b: b[1],
        beta_d: b[2],
        beta_w: b[3],
    }))
}

impl HarParams {
    /// Linear forecast clamped below at 0.
    pub fn predict(&self, lags: &HarLags) -> f64 {
        (self.beta0 + self.beta_b * lags.bucket + self.beta_d * lags.daily + self.beta_w * lags.weekly).max(0.0)
    }

    /// HAR forecast when both parameters and lags exist, else `fallback`.
    pub fn predict_or(params: Option<&HarParams>, lags: Option<&HarLags>, fallback: f64) -> f64 {
        match (params, lags) {
            (Some(p), Some(l)) => p.predict(l),
            _ => fallback,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(b: f64, d: f64, w: f64, y: f64) -> HarRow {
        HarRow {
            lags: HarLags {
                bucket: b,
                daily: d,
                weekly: w,
            },
            y,
        }
    }

    #[test]
    fn constant_panel_is_reproduced() {
        let obs: Vec<HarObservation> = (0..20)
            .flat_map(|day| {
                (0..6).map(move |_| HarObservation {
                    symbol: 0,
                    day,
                    backward_rv: 0.002,
                    target: 0.002,
                })
            })
            .collect();
        let lags = har_lags(&obs);
        assert!(lags[..30].iter().all(Option::is_none));
        assert!(lags[30..].iter().all(Option::is_some));
        let rows: Vec<HarRow> = lags
            .iter()
            .zip(&obs)
            .filter_map(|(l, o)| l.map(|lags| HarRow { lags, y: o.target }))
            .collect();
        // every column is constant: the design is rank deficient
        assert_eq!(har_fit(&rows).unwrap(), None);
        let p = HarParams {
            beta0: 0.0005,
            beta_b: 0.25,
            beta_d: 0.25,
            beta_w: 0.25,
        };
        assert!((p.predict(&rows[0].lags) - 0.002).abs() < 1e-15);
        assert_eq!(HarParams::predict_or(None, Some(&rows[0].lags), 0.7), 0.7);
    }

    #[test]
    fn negative_output_is_clamped() {
        let p = HarParams {
            beta0: -1.0,
            beta_b: 0.1,
            beta_d: 0.1,
            beta_w: 0.1,
        };
        assert_eq!(p.predict(&row(0.1, 0.1, 0.1, 0.0).lags), 0.0);
    }

    #[test]
    fn missing_history_is_excluded() {
        let mut obs = Vec::new();
        for day in [0usize, 1, 2, 3, 4, 5, 7] {
            obs.push(HarObservation {
                symbol: 3,
                day,
                backward_rv: 1.0,
                target: day as f64,
            });
        }
        let lags = har_lags(&obs);
        assert_eq!(lags[5].unwrap().daily, 4.0);
        assert_eq!(lags[5].unwrap().weekly, 2.0);
        assert!(lags[6].is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn residuals_are_orthogonal_to_design(
            data in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 8..60)
        ) {
            let rows: Vec<HarRow> = data.iter().map(|&(b, d, w, y)| row(b, d, w, y)).collect();
            if let Some(p) = har_fit(&rows).unwrap() {
                let mut dots = [0.0f64; 4];
                for r in &rows {
                    let e = r.y - (p.beta0 + p.beta_b * r.lags.bucket + p.beta_d * r.lags.daily + p.beta_w * r.lags.weekly);
                    dots[0] += e;
                    dots[1] += e * r.lags.bucket;
                    dots[2] += e * r.lags.daily;
                    dots[3] += e * r.lags.weekly;
                }
                for d in dots {
                    prop_assert!(d.abs() < 1e-8, "{d}");
                }
            }
        }
    }
}
