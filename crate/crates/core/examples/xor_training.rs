//! Trains a 10-neuron and a 3-neuron network on fresh XOR problems and
//! reports how often each one solves it.

use ensemble_prune::experiment::{run_trials, TrialKind};
use ensemble_prune::pruner::XorTrialConfig;

fn main() -> ensemble_prune::Result<()> {
    for hidden in [10, 3] {
        let cfg = XorTrialConfig { hidden, ..XorTrialConfig::default() };
        let summary = run_trials(TrialKind::Train, 50, &cfg, 7)?;
        println!("{}", summary.line(&format!("fcn{hidden}")));
    }
    Ok(())
}
