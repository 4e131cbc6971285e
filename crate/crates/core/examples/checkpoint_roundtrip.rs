//! Saves a residual network with pruned filters and reloads it, checking
//! that the outputs are bit-identical.

use ensemble_prune::models::tiny_resnet;
use ensemble_prune::nn::{checkpoint, MaskPosition};
use ensemble_prune::pruner::remove_filters;
use ensemble_prune::{SeedStream, Tensor};

fn main() -> ensemble_prune::Result<()> {
    let mut rng = SeedStream::new(5).rng();
    let net = tiny_resnet(3, 12, 4, MaskPosition::BeforeShortcut, &mut rng)?;
    let net = remove_filters(&net, 1, &[0, 2])?;
    let path = std::env::temp_dir().join("ensemble_prune_roundtrip.ckpt");
    checkpoint::save(&net, &path)?;
    let back = checkpoint::load(&path)?;
    let x = Tensor::new(vec![2, 3, 12, 12], (0..864).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let same = net.forward(&x)?.data() == back.forward(&x)?.data();
    println!("{} bytes written to {}", std::fs::metadata(&path)?.len(), path.display());
    println!("parameters {}, identical outputs: {same}", back.param_count());
    std::fs::remove_file(&path)?;
    Ok(())
}
