use ensemble_prune::nn::Network;
use ensemble_prune::pruner::remove_filters;
use ensemble_prune::Rng;
use rand::seq::index;
use rand::Rng as _;

use super::{batch_for, perturb, random_network, FAMILIES};

pub const TOL: f64 = 1e-9;

/// Random non-empty removal set leaving at least one filter.
pub fn random_removal(width: usize, rng: &mut Rng) -> Vec<usize> {
    let k = rng.random_range(1..width);
    index::sample(rng, width, k).into_vec()
}

/// Largest output difference between `net` with `indices` of `layer` masked
/// and the structurally pruned copy, over `inputs` random samples.
pub fn masked_vs_pruned(net: &Network, layer: usize, indices: &[usize], inputs: usize, rng: &mut Rng) -> f64 {
    let width = net.layer_width(layer).unwrap();
    let mut keep = vec![true; width];
    for &i in indices {
        keep[i] = false;
    }
    let mut masked = net.clone();
    masked.set_layer_mask(layer, &keep).unwrap();
    let pruned = remove_filters(net, layer, indices).unwrap();
    assert_eq!(pruned.layer_width(layer).unwrap(), width - indices.len());
    let x = batch_for(net, inputs, rng);
    masked.forward(&x).unwrap().max_abs_diff(&pruned.forward(&x).unwrap())
}

/// `triples` random (network, layer, removal set) cases cycling over every
/// network family, both residual mask positions included. Returns the worst
/// difference seen.
pub fn rewiring_sweep(triples: u64, seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..triples {
        let mut rng = ensemble_prune::SeedStream::new(seed).indexed(t).rng();
        let family = FAMILIES[t as usize % FAMILIES.len()];
        let mut net = random_network(family, &mut rng);
        perturb(&mut net, &mut rng);
        let layer = rng.random_range(0..net.num_prunable());
        let width = net.layer_width(layer).unwrap();
        let removal = random_removal(width, &mut rng);
        worst = worst.max(masked_vs_pruned(&net, layer, &removal, 100, &mut rng));
    }
    worst
}
