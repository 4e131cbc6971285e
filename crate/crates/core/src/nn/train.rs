use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::network::Network;

/// Learning rate as a function of the epoch index.
#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Constant(f64),
    /// Multiply by `gamma` every `every` epochs.
    Step { base: f64, every: usize, gamma: f64 },
    /// Multiply by `gamma` at each listed epoch.
    MultiStep {
        base: f64,
        milestones: Vec<usize>,
        gamma: f64,
    },
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize) -> f64 {
        match self {
            LrSchedule::Constant(lr) => *lr,
            LrSchedule::Step { base, every, gamma } => base * gamma.powi((epoch / every.max(&1)) as i32),
            LrSchedule::MultiStep {
                base,
                milestones,
                gamma,
            } => base * gamma.powi(milestones.iter().filter(|&&m| epoch >= m).count() as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub momentum: f64,
}

impl TrainConfig {
    pub fn new(epochs: usize, schedule: LrSchedule) -> Self {
        Self {
            epochs,
            batch_size: 32,
            schedule,
            momentum: 0.9,
        }
    }

    /// Short post-pruning recovery: 10 epochs at a flat 0.01.
    pub fn fine_tune() -> Self {
        Self::new(10, LrSchedule::Constant(0.01))
    }

    /// Final retraining after pruning: 80 epochs starting at 0.01, ×0.1
    /// every 20 epochs.
    pub fn final_retrain() -> Self {
        Self::new(
            80,
            LrSchedule::Step {
                base: 0.01,
                every: 20,
                gamma: 0.1,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    /// Mean mini-batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainStats {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Mini-batch SGD with momentum. The sample order of every epoch is drawn
/// from `rng`, so equal seeds give bit-identical parameters.
pub fn train(net: &mut Network, data: &Dataset, cfg: &TrainConfig, rng: &mut Rng) -> Result<TrainStats> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let batch_size = cfg.batch_size.max(1);
    let mut velocity: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.rate(epoch);
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(batch_size) {
            let (x, y) = data.batch(chunk);
            let grads = match net.gradients(&x, &y) {
                Ok(g) => g,
                Err(Error::NonFinite { .. }) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            if !grads.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            sum += grads.loss;
            batches += 1;
            if lr == 0.0 {
                continue;
            }
            for ((p, g), v) in net.params_mut().into_iter().zip(&grads.tensors).zip(&mut velocity) {
                for ((p, g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
                    *v = cfg.momentum * *v + g;
                    *p -= lr * *v;
                }
            }
        }
        let mean = sum / batches as f64;
        if !mean.is_finite() || net.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged { epoch });
        }
        epoch_losses.push(mean);
    }
    Ok(TrainStats { epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let s = LrSchedule::Step {
            base: 0.01,
            every: 20,
            gamma: 0.1,
        };
        assert_eq!(s.rate(0), 0.01);
        assert!((s.rate(20) - 0.001).abs() < 1e-15);
        assert!((s.rate(79) - 1e-5).abs() < 1e-18);
        let m = LrSchedule::MultiStep {
            base: 0.1,
            milestones: vec![100, 150],
            gamma: 0.1,
        };
        assert_eq!(m.rate(99), 0.1);
        assert!((m.rate(100) - 0.01).abs() < 1e-15);
        assert!((m.rate(199) - 0.001).abs() < 1e-15);
    }
}
