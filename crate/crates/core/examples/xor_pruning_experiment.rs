//! Prunes trained 10-neuron XOR networks down to three neurons with each
//! strategy and compares how often the result still solves the problem.

use ensemble_prune::experiment::{run_trials, TrialKind};
use ensemble_prune::pruner::{PruningType, XorTrialConfig};

fn main() -> ensemble_prune::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let cfg = XorTrialConfig::default();
    for kind in [PruningType::Iterative, PruningType::OneShot, PruningType::Random] {
        let summary = run_trials(TrialKind::Prune(kind), trials, &cfg, 11)?;
        println!("{} (schedule {:?})", summary.line(kind.as_str()), kind.schedule());
    }
    Ok(())
}
