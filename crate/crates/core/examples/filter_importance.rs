//! Scores random filter ensembles of a trained network's hidden layer, fits
//! the linear importance model and prints the resulting ranking.

use ensemble_prune::importance::{layer_importance, ImportanceConfig};
use ensemble_prune::pruner::{train_xor_network, XorTrialConfig};
use ensemble_prune::SeedStream;

fn main() -> ensemble_prune::Result<()> {
    let seeds = SeedStream::new(3);
    let (net, train, full) = train_xor_network(&XorTrialConfig::default(), &seeds)?;
    println!("trained accuracy {:.4}", net.accuracy(&full)?);
    let cfg = ImportanceConfig::default();
    let (iv, masks) = layer_importance(&net, 0, &train, &cfg, &mut seeds.named("masks").rng())?;
    println!("{} masks scored", masks.len());
    for &i in &iv.ranking {
        println!("neuron {i:2}  theta {:+.4}", iv.theta[i]);
    }
    println!("least important three: {:?}", iv.least_important(3));
    Ok(())
}
