//! Layer-by-layer pruning under an accuracy-drop budget.
//!
//! Each step scores one prunable layer with random filter ensembles, finds
//! how many of its least important filters can be masked while validation
//! accuracy stays within `alpha` of the current baseline, removes them
//! structurally, and fine-tunes. Layers are visited first-to-last (forward)
//! or last-to-first (backward), wrapping around until the stopping condition
//! holds.

mod report;
mod rewire;
mod search;
mod xor;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::importance::{layer_importance, zeros_per_mask, ImportanceConfig};
use crate::metrics::{count_flops, count_params, ArchDescriptor};
use crate::nn::{train, Layer, MaskPosition, Network, TrainConfig};
use crate::rng::SeedStream;

pub use report::{LayerRecord, PruneReport, StepRecord, StopReason};
pub use rewire::remove_filters;
pub use search::{find_prune_count, PruneCount};
pub use xor::{
    fcn, is_success, train_xor_network, xor_prune_trial, xor_training_trial, PruningType, XorTrialConfig,
    XorTrialOutcome, SUCCESS_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// First prunable layer to last.
    #[default]
    Forward,
    /// Last prunable layer to first.
    Backward,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "backward" => Ok(Self::Backward),
            other => Err(Error::InvalidConfig(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    /// Stop once this fraction of the parameters has been removed (or no
    /// layer can be pruned any more).
    TargetParamsRemoved(f64),
    /// Stop after a full pass in which no layer could be pruned.
    NoLayerPrunable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneConfig {
    /// Maximum validation accuracy drop tolerated per layer step.
    pub alpha: f64,
    pub importance: ImportanceConfig,
    pub direction: Direction,
    pub finetune: Option<TrainConfig>,
    pub final_retrain: Option<TrainConfig>,
    pub stopping: Stopping,
    pub mask_position: MaskPosition,
    pub seed: u64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            alpha: 0.005,
            importance: ImportanceConfig::default(),
            direction: Direction::Forward,
            finetune: Some(TrainConfig::fine_tune()),
            final_retrain: Some(TrainConfig::final_retrain()),
            stopping: Stopping::NoLayerPrunable,
            mask_position: MaskPosition::BeforeShortcut,
            seed: 0,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} outside [0, 1)", self.alpha)));
        }
        if self.importance.masks_per_filter == 0 {
            return Err(Error::InvalidConfig("masks_per_filter must be ≥ 1".into()));
        }
        if let Stopping::TargetParamsRemoved(f) = self.stopping {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidConfig(format!("target fraction {f} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Switches every untouched residual block to `position`. Blocks that were
/// already pruned under another position are rejected.
fn apply_mask_position(net: &mut Network, position: MaskPosition) -> Result<()> {
    for layer in &mut net.layers {
        if let Layer::Residual(r) = layer {
            if r.position == position {
                continue;
            }
            let untouched = r.branch_map.iter().copied().eq(0..r.out_channels)
                && r.skip_map.iter().copied().eq((0..r.out_channels).map(Some));
            if !untouched {
                return Err(Error::InvalidConfig(
                    "residual block was pruned under a different mask position".into(),
                ));
            }
            r.position = position;
            r.mask2.clear();
        }
    }
    Ok(())
}

fn params_removed_fraction(original: u64, net: &Network) -> f64 {
    let now = count_params(&ArchDescriptor::from_network(net)).total;
    1.0 - now as f64 / original as f64
}

/// Runs the full pruning loop on a copy of `net` and returns the pruned
/// network with its report.
pub fn prune_network(
    net: &Network,
    train_data: &Dataset,
    val_data: &Dataset,
    cfg: &PruneConfig,
) -> Result<(Network, PruneReport)> {
    cfg.validate()?;
    let mut net = net.clone();
    net.clear_masks();
    apply_mask_position(&mut net, cfg.mask_position)?;
    let original = net.clone();
    let original_desc = ArchDescriptor::from_network(&original);
    let original_params = count_params(&original_desc).total;
    let streams = SeedStream::new(cfg.seed);
    let accuracy_before = net.accuracy(val_data)?;

    let n_layers = net.num_prunable();
    let order: Vec<usize> = match cfg.direction {
        Direction::Forward => (0..n_layers).collect(),
        Direction::Backward => (0..n_layers).rev().collect(),
    };
    let target_reached = |net: &Network| match cfg.stopping {
        Stopping::TargetParamsRemoved(f) => params_removed_fraction(original_params, net) >= f,
        Stopping::NoLayerPrunable => false,
    };

    let mut steps = Vec::new();
    let mut step_index = 0u64;
    let mut pass = 0usize;
    let stop_reason = 'outer: loop {
        let mut pruned_this_pass = false;
        for &layer in &order {
            if target_reached(&net) {
                break 'outer StopReason::TargetReached;
            }
            let width = net.layer_width(layer)?;
            let zeros = zeros_per_mask(width, cfg.importance.zero_fraction);
            if width <= 1 || zeros == 0 || zeros >= width {
                continue;
            }
            let step_seed = streams.named("step").indexed(step_index);
            step_index += 1;
            let importance = match layer_importance(
                &net,
                layer,
                train_data,
                &cfg.importance,
                &mut step_seed.named("masks").rng(),
            ) {
                Ok((iv, _)) => iv,
                Err(Error::DegenerateScores(_)) => continue,
                Err(e) => return Err(e),
            };
            let count = find_prune_count(&net, layer, &importance, cfg.alpha, val_data)?;
            if count.m == 0 {
                continue;
            }
            let removed = importance.least_important(count.m);
            rewire::remove_in_place(&mut net, layer, &removed)?;
            let accuracy_after_removal = net.accuracy(val_data)?;
            if let Some(ft) = &cfg.finetune {
                train(&mut net, train_data, ft, &mut step_seed.named("finetune").rng())?;
            }
            let desc = ArchDescriptor::from_network(&net);
            steps.push(StepRecord {
                pass,
                layer,
                width_before: width,
                removed: removed.clone(),
                baseline_accuracy: count.baseline,
                accuracy_after_removal,
                accuracy_after_finetune: net.accuracy(val_data)?,
                params: count_params(&desc).total,
                flops: count_flops(&desc)?.total,
            });
            pruned_this_pass = true;
        }
        if !pruned_this_pass {
            break if target_reached(&net) {
                StopReason::TargetReached
            } else {
                StopReason::NoLayerPrunable
            };
        }
        pass += 1;
    };

    let accuracy_before_retrain = net.accuracy(val_data)?;
    if let Some(rt) = &cfg.final_retrain {
        train(&mut net, train_data, rt, &mut streams.named("retrain").rng())?;
    }
    let accuracy_after = net.accuracy(val_data)?;
    let report = PruneReport::build(
        &original,
        &net,
        cfg,
        steps,
        stop_reason,
        accuracy_before,
        accuracy_before_retrain,
        accuracy_after,
    )?;
    Ok((net, report))
}
