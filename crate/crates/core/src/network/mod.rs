//! The block stack, its training loop and temporal sampling.

mod config;
mod model;
pub mod sampling;
pub mod synthetic;
mod train;

pub use config::NetworkConfig;
pub use model::{argmax, build_network, BlockShape, Classifier, Network};
pub use sampling::uniform_sample;
pub use train::{cosine_lr, evaluate, train, EpochLog, Sgd, TrainConfig, TrainLog};
