//! Fully connected regressor on the numeric features alone.

use std::rc::Rc;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::params::fan_in_uniform;
use crate::model::{Model, ParamStore, Sampling, Tape, TrainConfig, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64, 32],
            train: TrainConfig::default(),
        }
    }
}

/// `scale * softplus(...relu(x W + b)...)` with biases on every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub target_scale: f64,
    pub params: ParamStore,
}

impl MlpModel {
    pub fn new(config: MlpConfig, k_num: usize, target_scale: f64) -> Result<Self> {
        config.train.validate()?;
        if config.hidden.contains(&0) {
            return Err(Error::Config("MLP hidden widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let mut params = ParamStore::default();
        let mut width = k_num;
        for (l, &h) in config.hidden.iter().chain(std::iter::once(&1)).enumerate() {
            params.push(format!("dense{l}.w"), fan_in_uniform(width, h, &mut rng));
            params.push(format!("dense{l}.b"), Array2::zeros((1, h)));
            width = h;
        }
        Ok(Self {
            config,
            target_scale,
            params,
        })
    }
}

impl Model for MlpModel {
    /// Feature rows indexed by node id.
    type Context = Array2<f64>;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn train_config(&self) -> &TrainConfig {
        &self.config.train
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serializes")
    }

    fn forward(&self, tape: &mut Tape, ctx: &Array2<f64>, nodes: &[u32], _: Sampling<'_>) -> Result<Var> {
        let rows: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();
        if rows.iter().any(|&r| r >= ctx.nrows()) {
            return Err(Error::InvalidInput("node outside the feature matrix".into()));
        }
        let mut h = tape.leaf(ctx.select(Axis(0), &rows));
        let layers = self.params.len() / 2;
        for l in 0..layers {
            let w = tape.param(&self.params, 2 * l);
            let b = tape.param(&self.params, 2 * l + 1);
            let z = tape.matmul(h, w);
            let z = tape.add_row(z, b);
            h = if l + 1 < layers { tape.relu(z) } else { tape.softplus(z) };
        }
        Ok(tape.scale(h, self.target_scale))
    }
}

/// RMSPE of one batch, exposed for gradient checks.
#[doc(hidden)]
pub fn batch_loss(model: &MlpModel, x: &Array2<f64>, nodes: &[u32], targets: &[f64]) -> Result<(Tape, Var)> {
    let mut tape = Tape::new();
    let y = model.forward(&mut tape, x, nodes, Sampling::Full)?;
    let t: Vec<f64> = nodes.iter().map(|&n| targets[n as usize]).collect();
    let loss = tape.rmspe(y, Rc::new(t), model.config.train.eps)?;
    Ok((tape, loss))
}
