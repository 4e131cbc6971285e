//! Minimal deterministic neural-network engine: dense and convolutional
//! layers, batch normalization, channel masks, residual blocks, losses,
//! backpropagation and SGD.

pub mod checkpoint;
mod layers;
mod loss;
mod network;
mod residual;
mod train;

pub use layers::{BatchNorm, Conv2d, Dense, Mask, Mode};
pub use loss::{mean_loss, sigmoid, LossKind, LOG_CLAMP};
pub(crate) use network::Site;
pub use network::{Gradients, Layer, Network, NetworkBuilder, PrunableLayer};
pub use residual::{MaskPosition, ResidualBlock};
pub use train::{train, LrSchedule, TrainConfig, TrainStats};

pub(crate) use layers::remove_groups;
