//! Small trained networks shared by the pruning tests.

use ensemble_prune::data::{analytic_fcn3, gen_blob_images, gen_orthonormal_pair, gen_xor_dataset_with_basis, Dataset};
use ensemble_prune::models::{toy_cnn, BLOB_CHANNELS, BLOB_CLASSES, BLOB_HW};
use ensemble_prune::nn::{train, Dense, Layer, LossKind, LrSchedule, Mask, Network, TrainConfig};
use ensemble_prune::SeedStream;

/// Hand-built XOR network with its train and validation splits.
pub fn analytic_xor(seed: u64) -> (Network, Dataset, Dataset) {
    let s = SeedStream::new(seed);
    let (a, b) = gen_orthonormal_pair(&mut s.named("basis").rng());
    let net = analytic_fcn3(a, b).unwrap();
    let data = gen_xor_dataset_with_basis(1000, a, b, &mut s.named("data").rng()).unwrap().to_dataset();
    let (train, val) = data.split(0.8, &mut s.named("split").rng());
    (net, train, val)
}

/// The analytic network widened with a fourth hidden unit whose outgoing
/// weight is zero, so that unit can go at no cost.
pub fn analytic_xor_with_dead_unit(seed: u64) -> (Network, Dataset, Dataset) {
    let (net, train, val) = analytic_xor(seed);
    let (Layer::Dense(h), Layer::Dense(o)) = (&net.layers()[0], &net.layers()[3]) else {
        panic!("unexpected layout");
    };
    let mut hw = h.weights().to_vec();
    hw.extend([0.7, -0.7]);
    let mut hb = h.bias().to_vec();
    hb.push(0.3);
    let mut ow = o.weights().to_vec();
    ow.push(0.0);
    let wide = Network::from_layers(
        vec![2],
        vec![
            Layer::Dense(Dense::from_parts(2, 4, hw, hb).unwrap()),
            Layer::Relu,
            Layer::Mask(Mask::new(4)),
            Layer::Dense(Dense::from_parts(4, 1, ow, o.bias().to_vec()).unwrap()),
        ],
        LossKind::BinaryCrossEntropy,
    )
    .unwrap();
    (wide, train, val)
}

/// Toy CNN trained on the blob images.
pub fn trained_toy_cnn(seed: u64) -> (Network, Dataset, Dataset) {
    let s = SeedStream::new(seed);
    let data = gen_blob_images(BLOB_CLASSES, 800, BLOB_HW, BLOB_CHANNELS, &mut s.named("data").rng()).unwrap();
    let (tr, val) = data.split(0.8, &mut s.named("split").rng());
    let mut net = toy_cnn(BLOB_CHANNELS, BLOB_HW, BLOB_CLASSES, &mut s.named("init").rng()).unwrap();
    let cfg = TrainConfig::new(
        30,
        LrSchedule::Step {
            base: 0.05,
            every: 10,
            gamma: 0.3,
        },
    );
    train(&mut net, &tr, &cfg, &mut s.named("train").rng()).unwrap();
    (net, tr, val)
}
