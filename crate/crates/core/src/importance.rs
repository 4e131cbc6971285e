//! Filter importance from random filter ensembles.
//!
//! For one prunable layer, `M` random binary masks each switch off the same
//! number of filters. The network loss under every mask is mapped to a score
//! in `[0, 1]` (1 for the best mask, 0 for the worst) and a linear, additive
//! model `score ≈ θᵀz` is fitted by least squares. The coefficients `θ` are
//! the filter importances.

use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{lstsq, Matrix};
use crate::nn::Network;
use crate::rng::Rng;

/// Default fraction of filters switched off per mask.
pub const DEFAULT_ZERO_FRACTION: f64 = 0.3;
/// Default number of masks per filter (`M = 10 · N_l`).
pub const DEFAULT_MASKS_PER_FILTER: usize = 10;
/// Default cap on the number of samples used to score masks.
pub const DEFAULT_SCORING_SAMPLES: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceConfig {
    pub zero_fraction: f64,
    pub masks_per_filter: usize,
    pub scoring_samples: usize,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            zero_fraction: DEFAULT_ZERO_FRACTION,
            masks_per_filter: DEFAULT_MASKS_PER_FILTER,
            scoring_samples: DEFAULT_SCORING_SAMPLES,
        }
    }
}

/// Number of zeros per mask: `round(p · n_filters)`.
pub fn zeros_per_mask(n_filters: usize, zero_fraction: f64) -> usize {
    (zero_fraction * n_filters as f64).round() as usize
}

/// `m` random masks over `n_filters`, each with exactly
/// `round(zero_fraction · n_filters)` zeros. Duplicates are redrawn, up to
/// `100 · m` extra draws in total, after which they are accepted.
pub fn generate_masks(n_filters: usize, zero_fraction: f64, m: usize, rng: &mut Rng) -> Result<Vec<Vec<bool>>> {
    if !(zero_fraction > 0.0 && zero_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("zero fraction {zero_fraction} outside (0, 1)")));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("need at least one mask".into()));
    }
    let zeros = zeros_per_mask(n_filters, zero_fraction);
    if zeros == 0 || zeros >= n_filters {
        return Err(Error::DegenerateEnsemble {
            zeros,
            width: n_filters,
        });
    }
    let mut masks: Vec<Vec<bool>> = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::with_capacity(m);
    let mut retries_left = 100 * m;
    while masks.len() < m {
        let mut mask = vec![true; n_filters];
        for i in index::sample(rng, n_filters, zeros) {
            mask[i] = false;
        }
        if !seen.insert(mask.clone()) && retries_left > 0 {
            retries_left -= 1;
            continue;
        }
        masks.push(mask);
    }
    Ok(masks)
}

/// Maps losses to scores `1 − (L − L_min)/(L_max − L_min)`.
pub fn normalized_scores(losses: &[f64]) -> Result<Vec<f64>> {
    if losses.len() < 2 {
        return Err(Error::InvalidConfig("need at least two losses to normalize".into()));
    }
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.partial_cmp(&min) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateScores(min));
    }
    let range = max - min;
    Ok(losses.iter().map(|&l| 1.0 - (l - min) / range).collect())
}

/// Masks of one layer with their losses and normalized scores.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskDataset {
    pub layer: usize,
    pub zero_fraction: f64,
    pub masks: Vec<Vec<bool>>,
    pub losses: Vec<f64>,
    pub scores: Vec<f64>,
}

impl MaskDataset {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// One row per mask: the mask bits, the loss, the score.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let width = self.masks.first().map_or(0, Vec::len);
        let mut header: Vec<String> = (0..width).map(|i| format!("z{i}")).collect();
        header.extend(["loss".into(), "score".into()]);
        writeln!(w, "{}", header.join(","))?;
        for ((mask, loss), score) in self.masks.iter().zip(&self.losses).zip(&self.scores) {
            let bits: Vec<&str> = mask.iter().map(|&k| if k { "1" } else { "0" }).collect();
            writeln!(w, "{},{loss},{score}", bits.join(","))?;
        }
        Ok(())
    }
}

/// Evaluates the inference-mode loss of `net` on `data` under every mask of
/// `layer`. Each evaluation runs on a private copy, so `net` itself is never
/// modified.
pub fn score_masks(net: &Network, layer: usize, masks: &[Vec<bool>], data: &Dataset) -> Result<MaskDataset> {
    if masks.len() < 2 {
        return Err(Error::InvalidConfig("need at least two masks to score".into()));
    }
    let width = net.layer_width(layer)?;
    if let Some(bad) = masks.iter().find(|m| m.len() != width) {
        return Err(Error::MaskLength {
            expected: width,
            got: bad.len(),
        });
    }
    let losses = masks
        .par_iter()
        .map(|mask| {
            let mut probe = net.clone();
            probe.clear_masks();
            probe.set_layer_mask(layer, mask)?;
            probe.loss(data)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scores = normalized_scores(&losses)?;
    let zero_fraction = masks[0].iter().filter(|&&k| !k).count() as f64 / width as f64;
    Ok(MaskDataset {
        layer,
        zero_fraction,
        masks: masks.to_vec(),
        losses,
        scores,
    })
}

/// Per-filter importance and the filters ordered from least to most
/// important (ties broken by ascending index).
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    pub theta: Vec<f64>,
    pub ranking: Vec<usize>,
}

impl ImportanceVector {
    pub fn from_theta(theta: Vec<f64>) -> Self {
        let mut ranking: Vec<usize> = (0..theta.len()).collect();
        ranking.sort_by(|&i, &j| theta[i].total_cmp(&theta[j]).then(i.cmp(&j)));
        Self { theta, ranking }
    }

    /// The `m` least important filter indices, ascending by index.
    pub fn least_important(&self, m: usize) -> Vec<usize> {
        let mut v = self.ranking[..m.min(self.ranking.len())].to_vec();
        v.sort_unstable();
        v
    }
}

/// Least-squares fit of `scores ≈ Z θ` over binary design rows `masks`.
pub fn solve_importance(masks: &[Vec<bool>], scores: &[f64]) -> Result<ImportanceVector> {
    if masks.is_empty() {
        return Err(Error::DimensionMismatch("no masks".into()));
    }
    if masks.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} masks but {} scores",
            masks.len(),
            scores.len()
        )));
    }
    let rows: Vec<Vec<f64>> = masks
        .iter()
        .map(|m| m.iter().map(|&k| if k { 1.0 } else { 0.0 }).collect())
        .collect();
    let z = Matrix::from_rows(&rows)?;
    if z.cols() == 0 {
        return Err(Error::DimensionMismatch("masks have no columns".into()));
    }
    Ok(ImportanceVector::from_theta(lstsq(&z, scores)?.theta))
}

/// Mask generation, scoring on a fixed subset of `data`, and the linear fit
/// for one prunable layer.
pub fn layer_importance(
    net: &Network,
    layer: usize,
    data: &Dataset,
    cfg: &ImportanceConfig,
    rng: &mut Rng,
) -> Result<(ImportanceVector, MaskDataset)> {
    let width = net.layer_width(layer)?;
    let masks = generate_masks(width, cfg.zero_fraction, cfg.masks_per_filter.max(1) * width, rng)?;
    let subset = data.sample(cfg.scoring_samples, rng);
    let ds = score_masks(net, layer, &masks, &subset)?;
    let iv = solve_importance(&ds.masks, &ds.scores)?;
    Ok((iv, ds))
}
