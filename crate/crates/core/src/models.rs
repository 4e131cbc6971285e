//! Named network and dataset recipes shared by the CLI and the examples.

use std::str::FromStr;

use crate::data::{gen_blob_images, gen_xor_dataset, Dataset};
use crate::error::{Error, Result};
use crate::nn::{LossKind, MaskPosition, Network, NetworkBuilder};
use crate::pruner::fcn;
use crate::rng::Rng;

/// Side length of the blob images used by the convolutional recipes.
pub const BLOB_HW: usize = 12;
pub const BLOB_CHANNELS: usize = 3;
pub const BLOB_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    /// `2 → n → 1` fully connected network for XOR.
    Fcn(usize),
    /// Two conv layers with batch norm, global pooling and a classifier.
    ToyCnn,
    /// A stem conv followed by two residual blocks.
    TinyResNet(MaskPosition),
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(n) = s.strip_prefix("fcn") {
            let n: usize = n
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad hidden width in `{s}`")))?;
            if n == 0 {
                return Err(Error::InvalidConfig("fcn needs ≥1 hidden unit".into()));
            }
            return Ok(Self::Fcn(n));
        }
        match s {
            "toy-cnn" => Ok(Self::ToyCnn),
            "tiny-resnet" | "tiny-resnet-before" => Ok(Self::TinyResNet(MaskPosition::BeforeShortcut)),
            "tiny-resnet-after" => Ok(Self::TinyResNet(MaskPosition::AfterShortcut)),
            other => Err(Error::InvalidConfig(format!(
                "unknown model `{other}` (expected fcnN, toy-cnn, tiny-resnet, tiny-resnet-after)"
            ))),
        }
    }
}

impl ModelSpec {
    /// Dataset the model is meant to be trained on.
    pub fn default_data(&self) -> DataSpec {
        match self {
            ModelSpec::Fcn(_) => DataSpec::Xor,
            _ => DataSpec::Blobs,
        }
    }

    pub fn build(&self, rng: &mut Rng) -> Result<Network> {
        match *self {
            ModelSpec::Fcn(n) => fcn(n, rng),
            ModelSpec::ToyCnn => toy_cnn(BLOB_CHANNELS, BLOB_HW, BLOB_CLASSES, rng),
            ModelSpec::TinyResNet(p) => tiny_resnet(BLOB_CHANNELS, BLOB_HW, BLOB_CLASSES, p, rng),
        }
    }
}

/// `conv8 → bn → relu → mask → conv16/2 → bn → relu → mask → gap → dense`.
pub fn toy_cnn(channels: usize, hw: usize, classes: usize, rng: &mut Rng) -> Result<Network> {
    NetworkBuilder::new(vec![channels, hw, hw], LossKind::CrossEntropy)
        .conv(8, 3, 1, 1, rng)
        .batch_norm()
        .relu()
        .mask()
        .conv(16, 3, 2, 1, rng)
        .batch_norm()
        .relu()
        .mask()
        .global_avg_pool()
        .dense(classes, rng)
        .build()
}

/// `conv8 → bn → relu → mask → 2 × residual(8) → gap → dense`.
pub fn tiny_resnet(
    channels: usize,
    hw: usize,
    classes: usize,
    position: MaskPosition,
    rng: &mut Rng,
) -> Result<Network> {
    NetworkBuilder::new(vec![channels, hw, hw], LossKind::CrossEntropy)
        .conv(8, 3, 1, 1, rng)
        .batch_norm()
        .relu()
        .mask()
        .residual(position, rng)
        .residual(position, rng)
        .global_avg_pool()
        .dense(classes, rng)
        .build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSpec {
    Xor,
    Blobs,
}

impl FromStr for DataSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor" => Ok(Self::Xor),
            "blobs" => Ok(Self::Blobs),
            other => Err(Error::InvalidConfig(format!("unknown dataset `{other}` (expected xor, blobs)"))),
        }
    }
}

impl DataSpec {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataSpec::Xor => "xor",
            DataSpec::Blobs => "blobs",
        }
    }

    pub fn generate(&self, n: usize, rng: &mut Rng) -> Result<Dataset> {
        match self {
            DataSpec::Xor => Ok(gen_xor_dataset(n, rng)?.to_dataset()),
            DataSpec::Blobs => gen_blob_images(BLOB_CLASSES, n, BLOB_HW, BLOB_CHANNELS, rng),
        }
    }
}
