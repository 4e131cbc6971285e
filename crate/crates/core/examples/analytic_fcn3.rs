//! Builds the hand-constructed three-neuron XOR solver for a random basis
//! and evaluates it on fresh samples.

use ensemble_prune::data::{analytic_fcn3, gen_orthonormal_pair, gen_xor_dataset_with_basis};
use ensemble_prune::nn::Layer;
use ensemble_prune::SeedStream;

fn main() -> ensemble_prune::Result<()> {
    let seeds = SeedStream::new(1);
    let (a, b) = gen_orthonormal_pair(&mut seeds.named("basis").rng());
    let net = analytic_fcn3(a, b)?;
    let data = gen_xor_dataset_with_basis(10_000, a, b, &mut seeds.named("data").rng())?;
    println!("basis a = {a:.3?}, b = {b:.3?}");
    if let Layer::Dense(out) = &net.layers()[3] {
        println!("output weights {:.4?}, bias {:.2e}", out.weights(), out.bias()[0]);
    }
    println!("accuracy on 10000 fresh samples: {:.4}", net.accuracy(&data.to_dataset())?);
    Ok(())
}
