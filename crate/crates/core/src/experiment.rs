//! Repeated seeded trials and their success-rate summary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pruner::{xor_prune_trial, xor_training_trial, PruningType, XorTrialConfig, XorTrialOutcome};
use crate::rng::SeedStream;

/// What a single trial does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialKind {
    /// Train a fresh network and check it solves XOR.
    Train,
    Prune(PruningType),
}

impl TrialKind {
    pub fn label(&self) -> &'static str {
        match self {
            TrialKind::Train => "train",
            TrialKind::Prune(p) => p.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessSummary {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// 95% Wilson score interval for the success probability.
    pub ci_low: f64,
    pub ci_high: f64,
    pub accuracies: Vec<f64>,
}

impl SuccessSummary {
    pub fn from_outcomes(outcomes: &[XorTrialOutcome]) -> Self {
        let trials = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.success).count();
        let (ci_low, ci_high) = wilson_interval(successes, trials, 1.959_963_984_540_054);
        Self {
            trials,
            successes,
            rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
            accuracies: outcomes.iter().map(|o| o.accuracy).collect(),
        }
    }

    pub fn line(&self, label: &str) -> String {
        format!(
            "{label}: {}/{} successful ({:.1}%), 95% CI [{:.1}%, {:.1}%]",
            self.successes,
            self.trials,
            100.0 * self.rate,
            100.0 * self.ci_low,
            100.0 * self.ci_high
        )
    }
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs `trials` independent trials in parallel. Trial `i` draws all of its
/// randomness from `SeedStream::new(seed).named("trials").indexed(i)`, so
/// results do not depend on the thread count.
pub fn run_trials(kind: TrialKind, trials: usize, cfg: &XorTrialConfig, seed: u64) -> Result<SuccessSummary> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be ≥ 1".into()));
    }
    let root = SeedStream::new(seed).named("trials");
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let seeds = root.indexed(i);
            match kind {
                TrialKind::Train => xor_training_trial(cfg, &seeds),
                TrialKind::Prune(p) => xor_prune_trial(p, cfg, &seeds),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuccessSummary::from_outcomes(&outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_bounds_solve_score_equation() {
        // Each bound p satisfies |k/n − p| = z·sqrt(p(1−p)/n).
        let z = 1.96;
        for (k, n) in [(8, 10), (1, 7), (250, 300), (3, 1000)] {
            let (lo, hi) = wilson_interval(k, n, z);
            let phat = k as f64 / n as f64;
            for p in [lo, hi] {
                let lhs = (phat - p).abs();
                let rhs = z * (p * (1.0 - p) / n as f64).sqrt();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
            }
            assert!(lo < phat && phat < hi);
        }
        let (lo, hi) = wilson_interval(0, 5, z);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.4 && hi < 0.5);
    }

    #[test]
    fn single_trial_rate_is_binary() {
        let cfg = XorTrialConfig {
            samples: 100,
            train: crate::nn::TrainConfig::new(2, crate::nn::LrSchedule::Constant(0.01)),
            ..XorTrialConfig::default()
        };
        let s = run_trials(TrialKind::Train, 1, &cfg, 5).unwrap();
        assert!(s.rate == 0.0 || s.rate == 1.0);
    }
}
