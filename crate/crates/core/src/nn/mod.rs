//! From-scratch MLP and LSTM exceedance classifiers.

pub(crate) mod common;
pub mod features;
pub mod lstm;
pub mod mlp;
pub mod train;

pub use features::{build_features, FeatureMatrix, FeatureVariant};
pub use lstm::LstmWeights;
pub use mlp::MlpWeights;
pub use train::{
    load_checkpoint, predict_p2, save_checkpoint, train, Arch, Network, TrainConfig, TrainedModel,
};
