use ensemble_prune::data::Dataset;
use ensemble_prune::importance::{layer_importance, normalized_scores, solve_importance, ImportanceConfig};
use ensemble_prune::SeedStream;

use super::{batch_for, perturb, random_labels, random_network, FAMILIES};

/// Scores lie in [0, 1], hit both ends, and order strictly opposite to the
/// losses (equal losses, equal scores).
pub fn check_score_shape(losses: &[f64], scores: &[f64]) -> Result<(), String> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in scores {
        if !(0.0..=1.0).contains(&s) {
            return Err(format!("score {s} outside [0, 1]"));
        }
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if lo != 0.0 || hi != 1.0 {
        return Err(format!("endpoints not attained: [{lo}, {hi}]"));
    }
    for i in 0..losses.len() {
        for j in 0..losses.len() {
            let ok = if losses[i] < losses[j] {
                scores[i] > scores[j]
            } else if losses[i] == losses[j] {
                scores[i] == scores[j]
            } else {
                true
            };
            if !ok {
                return Err(format!("losses {} / {} but scores {} / {}", losses[i], losses[j], scores[i], scores[j]));
            }
        }
    }
    Ok(())
}

/// Every strict ordering of `theta` (by more than `gap`) survives in `other`.
pub fn same_order(theta: &[f64], other: &[f64], gap: f64) -> bool {
    (0..theta.len()).all(|i| (0..theta.len()).all(|j| theta[i] + gap >= theta[j] || other[i] < other[j]))
}

/// Scores every prunable layer of seeded networks of every family and checks
/// the score shape, plus ranking invariance under `a·L + b` for a few
/// `(a, b)` with `a > 0`. Returns the number of layers checked.
pub fn score_sweep(seed: u64) -> Result<usize, String> {
    let mut checked = 0;
    for (f, family) in FAMILIES.iter().enumerate() {
        let seeds = SeedStream::new(seed).indexed(f as u64);
        let mut rng = seeds.rng();
        let mut net = random_network(*family, &mut rng);
        perturb(&mut net, &mut rng);
        let data = Dataset::new(batch_for(&net, 64, &mut rng), random_labels(&net, 64, &mut rng), 2.max(net.output_shape()[0])).unwrap();
        for layer in 0..net.num_prunable() {
            let width = net.layer_width(layer).unwrap();
            if width < 3 {
                continue;
            }
            let cfg = ImportanceConfig::default();
            let (iv, ds) = layer_importance(&net, layer, &data, &cfg, &mut seeds.named("masks").rng())
                .map_err(|e| format!("{family:?} layer {layer}: {e}"))?;
            check_score_shape(&ds.losses, &ds.scores).map_err(|e| format!("{family:?} layer {layer}: {e}"))?;
            for (a, b) in [(2.0, 0.0), (0.37, -5.0), (1e3, 42.0)] {
                let moved: Vec<f64> = ds.losses.iter().map(|l| a * l + b).collect();
                let s2 = normalized_scores(&moved).unwrap();
                let iv2 = solve_importance(&ds.masks, &s2).unwrap();
                if !same_order(&iv.theta, &iv2.theta, 1e-9) {
                    return Err(format!("{family:?} layer {layer}: ranking changed under a={a}, b={b}"));
                }
            }
            checked += 1;
        }
    }
    Ok(checked)
}
