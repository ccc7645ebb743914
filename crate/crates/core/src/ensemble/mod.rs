//! Ensemble of single-hidden-layer ReLU networks trained on perturbed
//! rewards, used as an approximate posterior over a nonlinear reward model.

mod buffer;
mod mlp;

pub use buffer::{perturbation, ReplayBuffer, ReplayEntry};
pub use mlp::Mlp;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub m_ens: usize,
    pub hidden_width: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    /// Reward perturbation sd; `None` uses the environment's noise sd.
    pub perturb_sd: Option<f64>,
    /// Gradient steps per interaction once training has started.
    pub steps_per_update: usize,
    /// Subtracted from rewards before fitting, so members predict deviations
    /// from a baseline level.
    pub reward_offset: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            m_ens: 60,
            hidden_width: 64,
            batch_size: 100,
            learning_rate: 0.1,
            buffer_capacity: 1024,
            perturb_sd: None,
            steps_per_update: 1,
            reward_offset: 77.0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.m_ens == 0 || self.hidden_width == 0 || self.batch_size == 0 {
            return Err(crate::Error::InvalidSpec("ensemble sizes must be positive".into()));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(crate::Error::InvalidSpec(format!(
                "batch size {} exceeds buffer capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(crate::Error::InvalidSpec("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// `m_ens` independent initialisations.
pub fn init_ensemble<R: Rng + ?Sized>(cfg: &EnsembleConfig, input_dim: usize, rng: &mut R) -> Vec<Mlp> {
    (0..cfg.m_ens).map(|_| Mlp::random(input_dim, cfg.hidden_width, rng)).collect()
}

/// One SGD step per member on mean squared error against member-specific
/// perturbed targets. The mini-batch indices are shared by all members.
pub fn train_step<R: Rng + ?Sized>(
    members: &mut [Mlp],
    buffer: &ReplayBuffer,
    cfg: &EnsembleConfig,
    perturb_sd: f64,
    rng: &mut R,
) {
    if buffer.is_empty() {
        return;
    }
    let batch: Vec<usize> = if buffer.len() <= cfg.batch_size {
        (0..buffer.len()).collect()
    } else {
        index::sample(rng, buffer.len(), cfg.batch_size).into_vec()
    };
    train_on_batch(members, buffer, &batch, cfg, perturb_sd);
}

/// Gradient step on an explicit batch.
pub fn train_on_batch(members: &mut [Mlp], buffer: &ReplayBuffer, batch: &[usize], cfg: &EnsembleConfig, perturb_sd: f64) {
    let scale = 2.0 / batch.len() as f64;
    for (j, member) in members.iter_mut().enumerate() {
        let mut grad = member.zeros_like();
        for &i in batch {
            let entry = buffer.get(i);
            let target = buffer.target(i, j, perturb_sd, cfg.reward_offset);
            let out = member.eval(&entry.features);
            member.accumulate_gradient(&entry.features, scale * (out - target), &mut grad);
        }
        member.apply(&grad, -cfg.learning_rate);
    }
}

/// Mean squared error of one member on a batch (the quantity `train_step`
/// descends).
pub fn batch_loss(member: &Mlp, buffer: &ReplayBuffer, batch: &[usize], j: usize, perturb_sd: f64, offset: f64) -> f64 {
    batch
        .iter()
        .map(|&i| (member.eval(&buffer.get(i).features) - buffer.target(i, j, perturb_sd, offset)).powi(2))
        .sum::<f64>()
        / batch.len() as f64
}
