//! Structured pruning with linear filter ensembles.
//!
//! The importance of each filter (or neuron) of a layer is estimated by
//! switching off random subsets of filters, measuring the loss of every
//! such ensemble, and fitting a linear model from the binary masks to the
//! normalized scores. Filters with the smallest coefficients are removed,
//! layer by layer, as long as validation accuracy stays within a budget.
//!
//! The crate carries its own small double-precision network engine (dense,
//! convolution, batch norm, residual blocks, SGD) so that the whole pipeline
//! runs without external frameworks:
//!
//! * [`nn`]: layers, networks, training and checkpoints
//! * [`data`]: the rotated XOR problem and synthetic blob images
//! * [`importance`]: mask ensembles, scores and the least-squares fit
//! * [`pruner`]: prune-count search, structural removal and the pruning loop
//! * [`metrics`]: parameter and FLOP accounting from architecture descriptors
//! * [`experiment`]: repeated seeded trials with confidence intervals

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod importance;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod pruner;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::{Rng, SeedStream};
pub use tensor::Tensor;
