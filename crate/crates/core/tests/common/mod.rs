#![allow(dead_code)]

pub mod accounting;
pub mod fixtures;
pub mod gradcheck;
pub mod rewiring;
pub mod scores;
pub mod solver;

use ensemble_prune::nn::{LossKind, MaskPosition, Mode, Network, NetworkBuilder};
use ensemble_prune::{Rng, Tensor};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian_tensor(shape: Vec<usize>, rng: &mut Rng) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape, data).unwrap()
}

pub fn batch_for(net: &Network, n: usize, rng: &mut Rng) -> Tensor {
    let mut shape = vec![n];
    shape.extend(net.input_shape());
    gaussian_tensor(shape, rng)
}

pub fn random_labels(net: &Network, n: usize, rng: &mut Rng) -> Vec<usize> {
    let classes = match net.loss_kind() {
        LossKind::BinaryCrossEntropy => 2,
        LossKind::CrossEntropy => net.output_shape()[0],
    };
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

/// Adds noise to every trainable parameter (so biases, γ and β are not at
/// their initial values) and runs a few training-mode forwards so batch-norm
/// running statistics move away from 0/1.
pub fn perturb(net: &mut Network, rng: &mut Rng) {
    for p in net.params_mut() {
        for v in p.iter_mut() {
            let n: f64 = StandardNormal.sample(rng);
            *v += 0.3 * n;
        }
    }
    for _ in 0..3 {
        let x = batch_for(net, 8, rng);
        net.forward_with_mode(&x, Mode::Train).unwrap();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Mlp,
    Cnn,
    ResNet(MaskPosition),
}

pub const FAMILIES: [Family; 4] = [
    Family::Mlp,
    Family::Cnn,
    Family::ResNet(MaskPosition::BeforeShortcut),
    Family::ResNet(MaskPosition::AfterShortcut),
];

/// Small random network of the given family with randomized widths.
pub fn random_network(family: Family, rng: &mut Rng) -> Network {
    let mut w = |lo: usize, hi: usize| rng.random_range(lo..=hi);
    let (a, b, c) = (w(2, 6), w(2, 6), w(2, 4));
    let net = match family {
        Family::Mlp => NetworkBuilder::new(vec![3], LossKind::CrossEntropy)
            .dense(a, rng)
            .relu()
            .mask()
            .dense(b, rng)
            .relu()
            .mask()
            .dense(c, rng),
        Family::Cnn => NetworkBuilder::new(vec![2, 5, 5], LossKind::CrossEntropy)
            .conv(a, 3, 1, 1, rng)
            .batch_norm()
            .relu()
            .mask()
            .conv(b, 3, 2, 1, rng)
            .relu()
            .mask()
            .flatten()
            .dense(c, rng),
        Family::ResNet(p) => NetworkBuilder::new(vec![2, 4, 4], LossKind::CrossEntropy)
            .conv(a, 3, 1, 1, rng)
            .batch_norm()
            .relu()
            .mask()
            .residual(p, rng)
            .residual(p, rng)
            .global_avg_pool()
            .dense(c, rng),
    };
    net.build().unwrap()
}
