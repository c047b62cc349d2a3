//! Root mean square percentage error.

use crate::error::{Error, Result};

/// Stabilizer added to every denominator.
pub const EPSILON: f64 = 1e-8;

/// `sqrt(mean(((pred - target) / (target + eps))^2))`.
pub fn rmspe(pred: &[f64], target: &[f64], eps: f64) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} predictions, {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("rmspe of an empty batch".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| ((p - t) / (t + eps)).powi(2))
        .sum();
    Ok((sum / pred.len() as f64).sqrt())
}
