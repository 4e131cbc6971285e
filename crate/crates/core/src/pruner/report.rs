use std::io::Write;

use super::PruneConfig;
use crate::error::Result;
use crate::metrics::{diff_metrics, ArchDescriptor, LayerKind, MetricsDiff};
use crate::nn::{Layer, Network, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TargetReached,
    NoLayerPrunable,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::TargetReached => "target-reached",
            StopReason::NoLayerPrunable => "no-layer-prunable",
        }
    }
}

/// One layer visit that removed at least one filter.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub pass: usize,
    /// Prunable layer index.
    pub layer: usize,
    pub width_before: usize,
    /// Removed filter indices (ascending, relative to the layer at that time).
    pub removed: Vec<usize>,
    /// Validation accuracy with every filter active, measured right before
    /// the search.
    pub baseline_accuracy: f64,
    pub accuracy_after_removal: f64,
    pub accuracy_after_finetune: f64,
    pub params: u64,
    pub flops: u64,
}

/// One weight layer (convolution or dense) of the architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    /// Position among the weight layers, starting at 1.
    pub layer: usize,
    pub kind: LayerKind,
    /// Prunable layer gating this layer's filters, if any.
    pub prunable: Option<usize>,
    pub filters_before: usize,
    pub flops_before: u64,
    pub filters_removed: usize,
    pub params_removed_pct: f64,
    pub flops_removed_pct: f64,
    /// Validation accuracy after the last fine-tune of this layer.
    pub val_accuracy_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub layers: Vec<LayerRecord>,
    pub steps: Vec<StepRecord>,
    pub stop_reason: StopReason,
    pub alpha: f64,
    pub params_before: u64,
    pub params_after: u64,
    pub flops_before: u64,
    pub flops_after: u64,
    pub params_removed_pct: f64,
    pub flops_removed_pct: f64,
    pub filters_before: usize,
    pub filters_removed: usize,
    /// Validation accuracy of the input network.
    pub accuracy_before: f64,
    pub accuracy_before_retrain: f64,
    pub accuracy_after: f64,
}

/// Descriptor index of every structural layer of `net`, following the
/// expansion order of [`ArchDescriptor::from_network`]. Residual blocks map
/// to their first convolution.
fn descriptor_offsets(net: &Network) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(net.layers().len());
    let mut next = 0;
    for layer in net.layers() {
        offsets.push(next);
        next += match layer {
            Layer::Dense(_) | Layer::Conv2d(_) | Layer::BatchNorm(_) => 1,
            Layer::Residual(_) => 4,
            _ => 0,
        };
    }
    offsets
}

/// Descriptor layer whose filters prunable layer `i` removes.
fn site_targets(net: &Network) -> Vec<usize> {
    let offsets = descriptor_offsets(net);
    net.sites()
        .into_iter()
        .map(|s| match s {
            Site::Top { producer, .. } => offsets[producer],
            Site::BlockFirst(b) => offsets[b],
            Site::BlockSecond(b) => offsets[b] + 2,
        })
        .collect()
}

impl PruneReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        original: &Network,
        pruned: &Network,
        cfg: &PruneConfig,
        steps: Vec<StepRecord>,
        stop_reason: StopReason,
        accuracy_before: f64,
        accuracy_before_retrain: f64,
        accuracy_after: f64,
    ) -> Result<Self> {
        let before = ArchDescriptor::from_network(original);
        let after = ArchDescriptor::from_network(pruned);
        let diff = diff_metrics(&before, &after)?;
        let targets = site_targets(original);
        Ok(Self::from_parts(
            &before,
            &diff,
            &targets,
            steps,
            stop_reason,
            cfg.alpha,
            [accuracy_before, accuracy_before_retrain, accuracy_after],
        ))
    }

    fn from_parts(
        before: &ArchDescriptor,
        diff: &MetricsDiff,
        targets: &[usize],
        steps: Vec<StepRecord>,
        stop_reason: StopReason,
        alpha: f64,
        acc: [f64; 3],
    ) -> Self {
        let mut layers = Vec::new();
        for (row, spec) in diff.rows.iter().zip(&before.layers) {
            if spec.kind == LayerKind::BatchNorm {
                continue;
            }
            let prunable = targets.iter().position(|&t| t == row.layer);
            let val_accuracy_after = prunable.and_then(|p| {
                steps
                    .iter()
                    .rev()
                    .find(|s| s.layer == p)
                    .map(|s| s.accuracy_after_finetune)
            });
            layers.push(LayerRecord {
                layer: layers.len() + 1,
                kind: spec.kind,
                prunable,
                filters_before: row.filters_before,
                flops_before: spec.flops().unwrap_or(0),
                filters_removed: row.filters_removed.max(0) as usize,
                params_removed_pct: row.params_removed_pct,
                flops_removed_pct: row.flops_removed_pct,
                val_accuracy_after,
            });
        }
        let filters_before = layers.iter().map(|l| l.filters_before).sum();
        let filters_removed = layers.iter().map(|l| l.filters_removed).sum();
        Self {
            layers,
            steps,
            stop_reason,
            alpha,
            params_before: diff.params_before,
            params_after: (diff.params_before as i64 - diff.params_removed) as u64,
            flops_before: diff.flops_before,
            flops_after: (diff.flops_before as i64 - diff.flops_removed) as u64,
            params_removed_pct: diff.params_removed_pct,
            flops_removed_pct: diff.flops_removed_pct,
            filters_before,
            filters_removed,
            accuracy_before: acc[0],
            accuracy_before_retrain: acc[1],
            accuracy_after: acc[2],
        }
    }

    /// Fraction (not percent) of parameters removed.
    pub fn params_removed_fraction(&self) -> f64 {
        self.params_removed_pct / 100.0
    }

    pub fn total_removed(&self) -> usize {
        self.filters_removed
    }

    /// CSV with header
    /// `layer,filters,flops,filters_removed,params_removed_pct,flops_removed_pct`,
    /// one row per weight layer and a final `total` row.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "layer,filters,flops,filters_removed,params_removed_pct,flops_removed_pct")?;
        for l in &self.layers {
            writeln!(
                w,
                "{},{},{},{},{:.2},{:.2}",
                l.layer, l.filters_before, l.flops_before, l.filters_removed, l.params_removed_pct, l.flops_removed_pct
            )?;
        }
        writeln!(
            w,
            "total,{},{},{},{:.2},{:.2}",
            self.filters_before, self.flops_before, self.filters_removed, self.params_removed_pct, self.flops_removed_pct
        )?;
        Ok(())
    }

    /// Multi-line human summary.
    pub fn summary(&self) -> String {
        format!(
            "stop: {}\nsteps: {}\nfilters removed: {}/{}\nparams: {} -> {} ({:.2}% removed)\nflops: {} -> {} ({:.2}% removed)\nval accuracy: {:.4} -> {:.4} (before retrain {:.4}); alpha {} relative to the accuracy at each step",
            self.stop_reason.as_str(),
            self.steps.len(),
            self.filters_removed,
            self.filters_before,
            self.params_before,
            self.params_after,
            self.params_removed_pct,
            self.flops_before,
            self.flops_after,
            self.flops_removed_pct,
            self.accuracy_before,
            self.accuracy_after,
            self.accuracy_before_retrain,
            self.alpha,
        )
    }
}
