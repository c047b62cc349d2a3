//! Column-wise z-scoring fitted on training rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Standardized values are clipped to `[-clip, clip]`.
    pub clip: f64,
}

impl Standardizer {
    /// Population mean and standard deviation per column; constant columns
    /// get unit scale.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, clip: f64) -> Result<Self> {
        // Welford updates
        let mut n = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for row in rows {
            if n == 0 {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            } else if row.len() != mean.len() {
                return Err(Error::InvalidInput("ragged feature rows".into()));
            }
            n += 1;
            for (k, &x) in row.iter().enumerate() {
                let d = x - mean[k];
                mean[k] += d / n as f64;
                m2[k] += d * (x - mean[k]);
            }
        }
        if n == 0 {
            return Err(Error::InvalidInput("cannot standardize zero rows".into()));
        }
        let std = m2
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n as f64).sqrt();
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std, clip })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_into(&self, row: &[f64], out: &mut [f64]) {
        for (k, (&x, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = ((x - self.mean[k]) / self.std[k]).clamp(-self.clip, self.clip);
        }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; row.len()];
        self.transform_into(row, &mut out);
        out
    }
}
