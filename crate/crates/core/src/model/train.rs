//! Mini-batch training with early stopping on validation RMSPE.

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::metrics::{rmspe, EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            lr_decay: 1.0,
            patience: 10,
            eps: EPSILON,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.lr_decay > 0.0 && self.eps >= 0.0) {
            return Err(Error::Config("learning rate, decay and eps must be positive".into()));
        }
        Ok(())
    }
}

/// How a forward pass treats neighbourhoods.
pub enum Sampling<'r> {
    Full,
    Uniform(&'r mut ChaCha8Rng),
}

/// A differentiable forecaster over flat node ids.
pub trait Model {
    type Context;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn train_config(&self) -> &TrainConfig;
    fn config_json(&self) -> String;

    /// Column of predictions, one row per entry of `nodes`.
    fn forward(&self, tape: &mut Tape, ctx: &Self::Context, nodes: &[u32], sampling: Sampling<'_>) -> Result<Var>;
}

pub struct TrainData<'a> {
    pub train: &'a [u32],
    pub val: &'a [u32],
    /// Target per flat node id.
    pub targets: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_rmspe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub seed: u64,
    pub config_hash: String,
    pub epochs: Vec<EpochRecord>,
    /// 0 when the initialization was kept.
    pub best_epoch: usize,
    pub best_val_rmspe: Option<f64>,
}

const PREDICT_BATCH: usize = 1024;

pub fn predict<M: Model>(model: &M, ctx: &M::Context, nodes: &[u32]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(nodes.len());
    for chunk in nodes.chunks(PREDICT_BATCH) {
        let mut tape = Tape::new();
        let y = model.forward(&mut tape, ctx, chunk, Sampling::Full)?;
        out.extend(tape.value(y).column(0).iter().copied());
    }
    Ok(out)
}

fn targets_of(data: &TrainData, nodes: &[u32]) -> Vec<f64> {
    nodes.iter().map(|&n| data.targets[n as usize]).collect()
}

/// Validation RMSPE of the current parameters.
pub fn evaluate<M: Model>(model: &M, ctx: &M::Context, nodes: &[u32], targets: &[f64]) -> Result<f64> {
    let pred = predict(model, ctx, nodes)?;
    let t: Vec<f64> = nodes.iter().map(|&n| targets[n as usize]).collect();
    rmspe(&pred, &t, model.train_config().eps)
}

/// Trains in place and keeps the parameters of the best validation epoch.
///
/// On a non-finite loss, gradient or parameter the best parameters so far
/// are restored before [`Error::Diverged`] is returned.
pub fn fit<M: Model>(model: &mut M, ctx: &M::Context, data: &TrainData) -> Result<TrainLog> {
    let cfg = model.train_config().clone();
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Config("empty training split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut opt = Adam::new(model.params(), cfg.learning_rate);
    let mut log = TrainLog {
        seed: cfg.seed,
        config_hash: crate::hashing::hash_bytes(model.config_json().as_bytes()),
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_rmspe: None,
    };
    let has_val = !data.val.is_empty();
    let mut best = model.params().clone();
    let mut best_val = if has_val {
        Some(evaluate(model, ctx, data.val, data.targets)?)
    } else {
        None
    };
    log.best_val_rmspe = best_val;
    let mut order = data.train.to_vec();
    let mut stale = 0usize;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let step = (|| -> Result<f64> {
                let mut tape = Tape::new();
                let pred = model.forward(&mut tape, ctx, chunk, Sampling::Uniform(&mut rng))?;
                let loss = tape.rmspe(pred, Rc::new(targets_of(data, chunk)), cfg.eps)?;
                let value = tape.value(loss)[[0, 0]];
                if !value.is_finite() {
                    return Err(Error::Numerical(format!("loss is {value}")));
                }
                let grads = tape.backward(loss, model.params())?;
                opt.step(model.params_mut(), &grads);
                if !model.params().all_finite() {
                    return Err(Error::Numerical("non-finite parameter after update".into()));
                }
                Ok(value)
            })();
            match step {
                Ok(v) => loss_sum += v,
                Err(e) => {
                    *model.params_mut() = best;
                    return Err(Error::Diverged {
                        epoch,
                        reason: e.to_string(),
                    });
                }
            }
            batches += 1;
        }
        opt.lr *= cfg.lr_decay;
        let val = if has_val {
            Some(evaluate(model, ctx, data.val, data.targets)?)
        } else {
            None
        };
        if let Some(v) = val.filter(|v| !v.is_finite()) {
            *model.params_mut() = best;
            return Err(Error::Diverged {
                epoch,
                reason: format!("validation RMSPE is {v}"),
            });
        }
        let train_loss = loss_sum / batches as f64;
        log::debug!("epoch {epoch}: train {train_loss:.5} val {val:?}");
        log.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_rmspe: val,
        });
        match (val, best_val) {
            (Some(v), Some(b)) if v < b => {
                best_val = Some(v);
                best = model.params().clone();
                log.best_epoch = epoch;
                stale = 0;
            }
            (Some(_), _) => {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
            (None, _) => {
                best = model.params().clone();
                log.best_epoch = epoch;
            }
        }
    }
    log.best_val_rmspe = best_val;
    *model.params_mut() = best;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2, Axis};

    /// `y = x w` on a single feature column.
    struct Linear {
        params: ParamStore,
        config: TrainConfig,
    }

    impl Model for Linear {
        type Context = Array2<f64>;

        fn params(&self) -> &ParamStore {
            &self.params
        }

        fn params_mut(&mut self) -> &mut ParamStore {
            &mut self.params
        }

        fn train_config(&self) -> &TrainConfig {
            &self.config
        }

        fn config_json(&self) -> String {
            serde_json::to_string(&self.config).unwrap()
        }

        fn forward(&self, tape: &mut Tape, ctx: &Array2<f64>, nodes: &[u32], _: Sampling<'_>) -> Result<Var> {
            let rows: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();
            let x = tape.leaf(ctx.select(Axis(0), &rows));
            let w = tape.param(&self.params, 0);
            Ok(tape.matmul(x, w))
        }
    }

    fn linear(w: f64, lr: f64) -> Linear {
        let mut params = ParamStore::default();
        params.push("w", array![[w]]);
        Linear {
            params,
            config: TrainConfig {
                epochs: 200,
                batch_size: 2,
                learning_rate: lr,
                patience: 5,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn learns_a_scale_and_keeps_the_best_epoch() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let targets = [2.0, 4.0, 6.0, 8.0];
        let mut m = linear(0.5, 0.05);
        let log = fit(&mut m, &x, &TrainData { train: &[0, 1, 2], val: &[3], targets: &targets }).unwrap();
        assert!((m.params.tensor(0)[[0, 0]] - 2.0).abs() < 0.05);
        let best = log.epochs.iter().filter_map(|e| e.val_rmspe).fold(f64::INFINITY, f64::min);
        assert_eq!(log.best_val_rmspe, Some(best));
        let restored = evaluate(&m, &x, &[3], &targets).unwrap();
        assert!((restored - best).abs() < 1e-12);
    }

    #[test]
    fn non_finite_validation_is_divergence() {
        let x = array![[1.0], [1.0], [f64::MAX]];
        let targets = [1.0, 1.0, 1.0];
        let mut m = linear(0.5, 4.0);
        let err = fit(&mut m, &x, &TrainData { train: &[0, 1], val: &[2], targets: &targets }).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }), "{err}");
        assert_eq!(m.params.tensor(0)[[0, 0]], 0.5);
    }
}
