//! Analytic gradients against central differences.

mod common;

use common::gradcheck::{check_family, check_network, random_masks};
use common::{perturb, Family, FAMILIES};
use ensemble_prune::nn::{LossKind, NetworkBuilder};
use ensemble_prune::SeedStream;

#[test]
fn dense_networks() {
    check_family(Family::Mlp, false).unwrap();
    check_family(Family::Mlp, true).unwrap();
}

#[test]
fn conv_networks() {
    check_family(Family::Cnn, false).unwrap();
    check_family(Family::Cnn, true).unwrap();
}

#[test]
fn residual_networks_both_mask_positions() {
    for f in &FAMILIES[2..] {
        check_family(*f, false).unwrap();
        check_family(*f, true).unwrap();
    }
}

#[test]
fn binary_cross_entropy_head() {
    for seed in 0..20 {
        let mut rng = SeedStream::new(seed).named("bce").rng();
        let mut net = NetworkBuilder::new(vec![2], LossKind::BinaryCrossEntropy)
            .dense(5, &mut rng)
            .relu()
            .mask()
            .dense(1, &mut rng)
            .build()
            .unwrap();
        perturb(&mut net, &mut rng);
        random_masks(&mut net, &mut rng);
        check_network(&mut net, &mut rng, &format!("bce seed={seed}")).unwrap();
    }
}
