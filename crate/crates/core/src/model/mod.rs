//! Graph transformer forecaster and the differentiation core it trains on.

pub mod adam;
pub mod checkpoint;
pub mod gtn;
pub mod params;
pub mod sampler;
pub mod tape;
pub mod train;

pub use checkpoint::Checkpoint;
pub use gtn::{GraphInputs, GtnConfig, GtnModel};
pub use params::ParamStore;
pub use sampler::{sample_blocks, SampledBatch};
pub use tape::{Adjacency, Gradients, Tape, Var};
pub use train::{evaluate, fit, predict, EpochRecord, Model, Sampling, TrainConfig, TrainData, TrainLog};
