use crate::data::Dataset;
use crate::error::Result;
use crate::importance::ImportanceVector;
use crate::nn::Network;

/// Absolute slack on the accuracy comparison, so that budgets such as
/// `0.95 − 0.005` are not lost to floating-point rounding.
const ACCURACY_SLACK: f64 = 1e-12;

/// Outcome of the prune-count search on one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneCount {
    /// Number of least-important filters that can go.
    pub m: usize,
    /// Validation accuracy with every filter active.
    pub baseline: f64,
    /// Validation accuracy with the `k + 1` least important filters masked,
    /// for every `k` evaluated (the last entry may be the violating one).
    pub trace: Vec<f64>,
}

/// Masks more and more of the least important filters (in ranking order,
/// one at a time) and returns the largest count whose validation accuracy
/// stays within `alpha` of the unmasked baseline. Stops at the first
/// violation and never removes the last filter. `net` is not modified.
pub fn find_prune_count(
    net: &Network,
    layer: usize,
    importance: &ImportanceVector,
    alpha: f64,
    val: &Dataset,
) -> Result<PruneCount> {
    let width = net.layer_width(layer)?;
    let mut probe = net.clone();
    probe.clear_masks();
    let baseline = probe.accuracy(val)?;
    let mut m = 0;
    let mut trace = Vec::new();
    let mut mask = vec![true; width];
    for k in 1..width {
        mask[importance.ranking[k - 1]] = false;
        probe.set_layer_mask(layer, &mask)?;
        let acc = probe.accuracy(val)?;
        trace.push(acc);
        if acc + ACCURACY_SLACK < baseline - alpha {
            break;
        }
        m = k;
    }
    Ok(PruneCount { m, baseline, trace })
}
