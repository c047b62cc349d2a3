//! Feature encoding of buckets into fixed-width numeric vectors.

pub mod aggregate;
pub mod encoder;
pub mod standardize;
pub mod store;

pub use aggregate::{aggregate, Aggregator, Windowed, PROGRESSIVE_STEPS};
pub use encoder::{
    encode_bucket, feature_index, NodeFeature, FEATURE_NAMES, NUM_FEATURES, WAP_FIRST_100,
    WAP_LAST_100,
};
pub use standardize::Standardizer;
