//! Trains a small CNN on synthetic blob images, prunes it layer by layer
//! under a 0.5% accuracy budget until 30% of the parameters are gone, and
//! prints the per-layer report.

use ensemble_prune::data::gen_blob_images;
use ensemble_prune::models::{toy_cnn, BLOB_CHANNELS, BLOB_CLASSES, BLOB_HW};
use ensemble_prune::nn::{train, LrSchedule, TrainConfig};
use ensemble_prune::pruner::{prune_network, Direction, PruneConfig, Stopping};
use ensemble_prune::SeedStream;

fn main() -> ensemble_prune::Result<()> {
    let seeds = SeedStream::new(0);
    let data = gen_blob_images(BLOB_CLASSES, 800, BLOB_HW, BLOB_CHANNELS, &mut seeds.named("data").rng())?;
    let (train_data, val) = data.split(0.8, &mut seeds.named("split").rng());
    let mut net = toy_cnn(BLOB_CHANNELS, BLOB_HW, BLOB_CLASSES, &mut seeds.named("init").rng())?;
    let schedule = LrSchedule::Step { base: 0.05, every: 10, gamma: 0.3 };
    train(&mut net, &train_data, &TrainConfig::new(30, schedule), &mut seeds.named("train").rng())?;

    let direction = match std::env::args().nth(1).as_deref() {
        Some("backward") => Direction::Backward,
        _ => Direction::Forward,
    };
    let cfg = PruneConfig {
        direction,
        stopping: Stopping::TargetParamsRemoved(0.3),
        ..PruneConfig::default()
    };
    let (pruned, report) = prune_network(&net, &train_data, &val, &cfg)?;
    println!("{}", report.summary());
    for s in &report.steps {
        println!(
            "pass {} layer {}: removed {:?} of {}, accuracy {:.4} -> {:.4}",
            s.pass, s.layer, s.removed, s.width_before, s.baseline_accuracy, s.accuracy_after_removal
        );
    }
    report.write_csv(std::io::stdout())?;
    println!("parameters {} -> {}", net.param_count(), pruned.param_count());
    Ok(())
}
