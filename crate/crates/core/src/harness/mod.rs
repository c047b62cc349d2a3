//! Synthetic data, splitting, experiment orchestration and reports.

pub mod audit;
pub mod config;
pub mod dataset;
pub mod experiment;
pub mod pipeline;
pub mod report;
pub mod split;
pub mod stages;
pub mod sweep;
pub mod synth;

pub use audit::LeakAudit;
pub use config::{ExperimentConfig, ModelKind, ModelSpec};
pub use dataset::{Dataset, NodeRecord};
pub use experiment::{run_experiment, ExperimentResult, ModelRun};
pub use pipeline::Prepared;
pub use split::{Boundaries, Part, Split};
pub use synth::{Latent, SyntheticSpec};
