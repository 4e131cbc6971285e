//! Monte-Carlo XOR trials: training success of small fully connected
//! networks, and pruning FCN10 down to the three neurons XOR needs.

use rand::seq::index;

use super::rewire::remove_in_place;
use crate::data::{gen_xor_dataset, Dataset};
use crate::error::{Error, Result};
use crate::importance::{layer_importance, ImportanceConfig};
use crate::nn::{train, LossKind, LrSchedule, Network, NetworkBuilder, TrainConfig};
use crate::rng::{Rng, SeedStream};

/// A trial succeeds when the final accuracy is strictly above this.
pub const SUCCESS_THRESHOLD: f64 = 0.95;

pub fn is_success(accuracy: f64) -> bool {
    accuracy > SUCCESS_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruningType {
    /// Remove 7 of 10 neurons at once, then retrain.
    OneShot,
    /// Remove 3, 2, 2 neurons, retraining after each step.
    Iterative,
    /// Remove 7 uniformly chosen neurons, then retrain.
    Random,
}

impl PruningType {
    pub fn as_str(&self) -> &'static str {
        match self {
            PruningType::OneShot => "one-shot",
            PruningType::Iterative => "iterative",
            PruningType::Random => "random",
        }
    }

    /// Neurons removed at each step.
    pub fn schedule(&self) -> &'static [usize] {
        match self {
            PruningType::OneShot | PruningType::Random => &[7],
            PruningType::Iterative => &[3, 2, 2],
        }
    }
}

impl std::str::FromStr for PruningType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-shot" | "oneshot" => Ok(Self::OneShot),
            "iterative" => Ok(Self::Iterative),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidConfig(format!("unknown pruning type `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XorTrialConfig {
    pub samples: usize,
    /// Fraction of samples used for training; the rest is validation.
    pub train_fraction: f64,
    pub hidden: usize,
    pub train: TrainConfig,
    /// Training after each pruning step.
    pub retrain: TrainConfig,
    pub importance: ImportanceConfig,
}

impl Default for XorTrialConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            train_fraction: 0.8,
            hidden: 10,
            train: TrainConfig::new(200, LrSchedule::Constant(0.004)),
            retrain: TrainConfig::new(100, LrSchedule::Constant(0.01)),
            importance: ImportanceConfig::default(),
        }
    }
}

/// `2 → hidden (ReLU, mask) → 1` network with a sigmoid output.
pub fn fcn(hidden: usize, rng: &mut Rng) -> Result<Network> {
    NetworkBuilder::new(vec![2], LossKind::BinaryCrossEntropy)
        .dense(hidden, rng)
        .relu()
        .mask()
        .dense(1, rng)
        .build()
}

#[derive(Debug, Clone, PartialEq)]
pub struct XorTrialOutcome {
    /// Accuracy on the whole generated dataset.
    pub accuracy: f64,
    pub success: bool,
    pub hidden_after: usize,
}

struct XorData {
    full: Dataset,
    train: Dataset,
}

fn xor_data(cfg: &XorTrialConfig, seeds: &SeedStream) -> Result<XorData> {
    let xor = gen_xor_dataset(cfg.samples, &mut seeds.named("data").rng())?;
    let full = xor.to_dataset();
    let (train, _val) = full.split(cfg.train_fraction, &mut seeds.named("split").rng());
    Ok(XorData { full, train })
}

/// Fresh dataset and network, trained once.
pub fn train_xor_network(cfg: &XorTrialConfig, seeds: &SeedStream) -> Result<(Network, Dataset, Dataset)> {
    let data = xor_data(cfg, seeds)?;
    let mut net = fcn(cfg.hidden, &mut seeds.named("init").rng())?;
    train(&mut net, &data.train, &cfg.train, &mut seeds.named("train").rng())?;
    Ok((net, data.train, data.full))
}

/// Trains a freshly initialised `cfg.hidden`-neuron network on a fresh XOR
/// dataset.
pub fn xor_training_trial(cfg: &XorTrialConfig, seeds: &SeedStream) -> Result<XorTrialOutcome> {
    let (net, _train, full) = train_xor_network(cfg, seeds)?;
    let accuracy = net.accuracy(&full)?;
    Ok(XorTrialOutcome {
        accuracy,
        success: is_success(accuracy),
        hidden_after: net.layer_width(0)?,
    })
}

/// Trains a fresh network, prunes its hidden layer on the given schedule
/// and reports whether the retrained result still solves the problem. No
/// accuracy budget applies: the removal counts are fixed.
pub fn xor_prune_trial(kind: PruningType, cfg: &XorTrialConfig, seeds: &SeedStream) -> Result<XorTrialOutcome> {
    let (mut net, train_data, full) = train_xor_network(cfg, seeds)?;
    let total: usize = kind.schedule().iter().sum();
    if total >= cfg.hidden {
        return Err(Error::InvalidConfig(format!(
            "cannot remove {total} of {} hidden neurons",
            cfg.hidden
        )));
    }
    for (step, &count) in kind.schedule().iter().enumerate() {
        let step_seeds = seeds.named("prune").indexed(step as u64);
        let removed = match kind {
            PruningType::Random => {
                let width = net.layer_width(0)?;
                let mut v = index::sample(&mut step_seeds.named("pick").rng(), width, count).into_vec();
                v.sort_unstable();
                v
            }
            _ => {
                let (iv, _) = layer_importance(
                    &net,
                    0,
                    &train_data,
                    &cfg.importance,
                    &mut step_seeds.named("masks").rng(),
                )?;
                iv.least_important(count)
            }
        };
        remove_in_place(&mut net, 0, &removed)?;
        train(&mut net, &train_data, &cfg.retrain, &mut step_seeds.named("retrain").rng())?;
    }
    let accuracy = net.accuracy(&full)?;
    Ok(XorTrialOutcome {
        accuracy,
        success: is_success(accuracy),
        hidden_after: net.layer_width(0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_threshold_is_strict() {
        assert!(is_success(0.951));
        assert!(!is_success(0.949));
        assert!(!is_success(0.95));
    }

    #[test]
    fn iterative_leaves_three_neurons() {
        let cfg = XorTrialConfig {
            samples: 200,
            train: TrainConfig::new(5, LrSchedule::Constant(0.01)),
            retrain: TrainConfig::new(2, LrSchedule::Constant(0.01)),
            ..XorTrialConfig::default()
        };
        for kind in [PruningType::OneShot, PruningType::Iterative, PruningType::Random] {
            let out = xor_prune_trial(kind, &cfg, &SeedStream::new(3)).unwrap();
            assert_eq!(out.hidden_after, 3);
        }
    }

    #[test]
    fn pruning_type_parses() {
        assert_eq!("iterative".parse::<PruningType>().unwrap(), PruningType::Iterative);
        assert!("greedy".parse::<PruningType>().is_err());
    }
}
