use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("mask length {got} does not match layer width {expected}")]
    MaskLength { expected: usize, got: usize },

    #[error("no prunable layer with index {0}")]
    NoSuchLayer(usize),

    #[error("degenerate ensemble: {zeros} zeros over {width} filters")]
    DegenerateEnsemble { zeros: usize, width: usize },

    #[error("all mask losses are equal ({0}); scores are undefined for this layer")]
    DegenerateScores(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("basis vectors are not orthonormal")]
    NotOrthonormal,

    #[error("invalid filter selection: {0}")]
    InvalidSelection(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("descriptor line {line}: {msg}")]
    Descriptor { line: usize, msg: String },

    #[error("unknown preset `{0}` (known: {known})", known = crate::metrics::PRESETS.join(", "))]
    UnknownPreset(String),

    #[error("incompatible descriptors: {0}")]
    IncompatibleDescriptors(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
