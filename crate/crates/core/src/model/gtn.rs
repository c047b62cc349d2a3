//! Graph transformer network.
//!
//! Layer `l` maps `d_l`-wide hidden states to `C * (d / C)` columns. Head `c`
//! occupies the `c`-th column block of each of the four layer matrices, so
//! `h W1` computes every head's self term at once. For target `i`:
//!
//! ```text
//! head_c(i) = (h_i W1)_c + sum_j alpha_ijc (h_j W2)_c
//! alpha_ic  = softmax_j( (h_i W3)_c . (h_j W4)_c / sqrt(d_l) )
//! h'_i      = relu(concat_c head_c(i))
//! y_i       = scale * softplus(h_i^L W0)
//! ```
//!
//! The self node never enters the softmax. Layer 0 is the numeric feature
//! row concatenated with the symbol embedding. There are no bias terms.
//! `scale` is a fixed positive constant, the mean training target, so that
//! freshly initialized outputs sit at the target's order of magnitude.

use std::rc::Rc;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{fan_in_uniform, normal, ParamStore};
use super::sampler::{sample_blocks, SampledBatch};
use super::tape::{Tape, Var};
use super::train::{Model, Sampling, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtnConfig {
    pub layers: usize,
    pub heads: usize,
    /// Hidden width of every layer output; split evenly over heads.
    pub channels: usize,
    /// Symbol embedding width.
    pub k_cat: usize,
    /// Neighbours sampled per node and layer during training.
    pub fanout: usize,
    pub train: TrainConfig,
}

impl Default for GtnConfig {
    fn default() -> Self {
        Self {
            layers: 3,
            heads: 8,
            channels: 128,
            k_cat: 32,
            fanout: 15,
            train: TrainConfig::default(),
        }
    }
}

impl GtnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.heads == 0 || self.channels == 0 {
            return Err(Error::Config("layers, heads and channels must be positive".into()));
        }
        if self.channels % self.heads != 0 {
            return Err(Error::Config(format!(
                "channels {} not divisible by heads {}",
                self.channels, self.heads
            )));
        }
        if self.fanout == 0 {
            return Err(Error::Config("fanout must be positive".into()));
        }
        self.train.validate()
    }
}

/// Per-node inputs and the graph a model runs on.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub graph: Graph,
    /// One row per flat node id; rows of absent nodes are never read.
    pub features: Array2<f64>,
    /// Symbol index per flat node id.
    pub symbols: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerIdx {
    w1: usize,
    w2: usize,
    w3: usize,
    w4: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtnModel {
    pub config: GtnConfig,
    pub n_symbols: usize,
    pub k_num: usize,
    pub target_scale: f64,
    pub params: ParamStore,
}

impl GtnModel {
    /// Fresh parameters. The embedding table has a reserved last row for
    /// symbols outside `0..n_symbols`.
    pub fn new(config: GtnConfig, n_symbols: usize, k_num: usize, target_scale: f64) -> Result<Self> {
        config.validate()?;
        if !(target_scale > 0.0 && target_scale.is_finite()) {
            return Err(Error::InvalidInput(format!("target scale {target_scale}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
        let mut params = ParamStore::default();
        params.push("embedding", normal(n_symbols + 1, config.k_cat, 0.1, &mut rng));
        let mut width = k_num + config.k_cat;
        for l in 0..config.layers {
            for w in ["w1", "w2", "w3", "w4"] {
                params.push(format!("layer{l}.{w}"), fan_in_uniform(width, config.channels, &mut rng));
            }
            width = config.channels;
        }
        params.push("w0", fan_in_uniform(width, 1, &mut rng));
        Ok(Self {
            config,
            n_symbols,
            k_num,
            target_scale,
            params,
        })
    }

    fn layer(&self, l: usize) -> LayerIdx {
        let base = 1 + 4 * l;
        LayerIdx {
            w1: base,
            w2: base + 1,
            w3: base + 2,
            w4: base + 3,
        }
    }

    fn w0(&self) -> usize {
        1 + 4 * self.config.layers
    }

    pub fn embedding_row(&self, symbol: u32) -> usize {
        (symbol as usize).min(self.n_symbols)
    }

    /// Layer-0 hidden states for `nodes`.
    fn input_layer(&self, tape: &mut Tape, inputs: &GraphInputs, nodes: &[u32]) -> Result<Var> {
        let rows: Vec<usize> = nodes.iter().map(|&n| n as usize).collect();
        if let Some(&bad) = rows.iter().find(|&&r| r >= inputs.features.nrows()) {
            return Err(Error::InvalidInput(format!("node {bad} not in graph index")));
        }
        let x = tape.leaf(inputs.features.select(Axis(0), &rows));
        let emb = tape.param(&self.params, 0);
        let sym: Vec<usize> = rows
            .iter()
            .map(|&r| self.embedding_row(inputs.symbols[r]))
            .collect();
        let e = tape.gather(emb, Rc::new(sym));
        Ok(tape.concat(&[x, e]))
    }

    /// Runs all layers over a sampled batch; one prediction per target.
    pub fn forward_batch(&self, tape: &mut Tape, inputs: &GraphInputs, batch: &SampledBatch) -> Result<Var> {
        let mut h = self.input_layer(tape, inputs, &batch.frontiers[0])?;
        for l in 0..self.config.layers {
            let idx = self.layer(l);
            let d_in = tape.value(h).ncols();
            let hd = tape.gather(h, batch.self_rows[l].clone());
            let w1 = tape.param(&self.params, idx.w1);
            let w2 = tape.param(&self.params, idx.w2);
            let w3 = tape.param(&self.params, idx.w3);
            let w4 = tape.param(&self.params, idx.w4);
            let own = tape.matmul(hd, w1);
            let q = tape.matmul(hd, w3);
            let k = tape.matmul(h, w4);
            let v = tape.matmul(h, w2);
            let agg = tape.attention(
                q,
                k,
                v,
                self.config.heads,
                1.0 / (d_in as f64).sqrt(),
                batch.blocks[l].clone(),
            );
            let pre = tape.add(own, agg);
            h = tape.relu(pre);
        }
        let w0 = tape.param(&self.params, self.w0());
        let y = tape.matmul(h, w0);
        let y = tape.softplus(y);
        Ok(tape.scale(y, self.target_scale))
    }
}

impl Model for GtnModel {
    type Context = GraphInputs;

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

    fn forward(&self, tape: &mut Tape, ctx: &GraphInputs, nodes: &[u32], sampling: Sampling<'_>) -> Result<Var> {
        let layers = self.config.layers;
        let batch = match sampling {
            Sampling::Full => {
                let mut unused = ChaCha8Rng::seed_from_u64(0);
                sample_blocks(&ctx.graph, nodes, layers, None, &mut unused)
            }
            Sampling::Uniform(rng) => sample_blocks(&ctx.graph, nodes, layers, Some(self.config.fanout), rng),
        };
        self.forward_batch(tape, ctx, &batch)
    }
}
