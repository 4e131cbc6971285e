use ensemble_prune::nn::{Mode, Network};
use ensemble_prune::{Rng, Tensor};
use rand::Rng as _;

use super::{batch_for, perturb, random_labels, random_network, Family};

const H: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;
/// Denominator floor so that gradients which are zero up to rounding compare
/// absolutely.
const FLOOR: f64 = 1e-5;

pub fn random_masks(net: &mut Network, rng: &mut Rng) {
    for layer in 0..net.num_prunable() {
        let width = net.layer_width(layer).unwrap();
        let mut mask: Vec<bool> = (0..width).map(|_| rng.random_bool(0.7)).collect();
        mask[rng.random_range(0..width)] = true;
        net.set_layer_mask(layer, &mask).unwrap();
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// Central difference of the batch loss along one parameter scalar.
fn central(net: &mut Network, x: &Tensor, y: &[usize], t: usize, j: usize, h: f64) -> f64 {
    let orig = net.params()[t][j];
    net.params_mut()[t][j] = orig + h;
    let up = net.batch_loss(x, y, Mode::Train).unwrap();
    net.params_mut()[t][j] = orig - h;
    let down = net.batch_loss(x, y, Mode::Train).unwrap();
    net.params_mut()[t][j] = orig;
    (up - down) / (2.0 * h)
}

/// Worst relative error over every parameter scalar, or `None` when the
/// loss is not smooth at this batch: halving the step then changes the
/// central difference itself beyond the tolerance, which happens when a
/// ReLU input sits within a step of zero.
fn worst_relative_error(net: &mut Network, x: &Tensor, y: &[usize]) -> Option<f64> {
    let analytic = net.gradients(x, y).unwrap().tensors;
    let mut worst = 0.0f64;
    for (t, g) in analytic.iter().enumerate() {
        assert_eq!(g.len(), net.params()[t].len());
        for (j, &a) in g.iter().enumerate() {
            let numeric = central(net, x, y, t, j, H);
            if rel(numeric, central(net, x, y, t, j, H / 2.0)) > REL_TOL / 10.0 {
                return None;
            }
            worst = worst.max(rel(a, numeric));
        }
    }
    Some(worst)
}

/// Draws batches until one lies in a smooth region, then checks it.
pub fn check_network(net: &mut Network, rng: &mut Rng, what: &str) -> Result<(), String> {
    for _ in 0..10 {
        let x = batch_for(net, 6, rng);
        let y = random_labels(net, 6, rng);
        if let Some(err) = worst_relative_error(net, &x, &y) {
            return if err < REL_TOL {
                Ok(())
            } else {
                Err(format!("{what}: rel err {err:e}"))
            };
        }
    }
    Err(format!("{what}: no smooth batch found"))
}

/// 20 seeded networks of one family.
pub fn check_family(family: Family, masked: bool) -> Result<(), String> {
    for seed in 0..20 {
        let mut rng = ensemble_prune::SeedStream::new(seed).named("grad").rng();
        let mut net = random_network(family, &mut rng);
        perturb(&mut net, &mut rng);
        if masked {
            random_masks(&mut net, &mut rng);
        }
        check_network(&mut net, &mut rng, &format!("{family:?} masked={masked} seed={seed}"))?;
    }
    Ok(())
}

