use serde::{Deserialize, Serialize};

use super::ResponseDatabase;
use crate::ensemble::Mlp;
use crate::Result;

/// `β₀ + zᵀβ + offset[x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReward {
    pub beta0: f64,
    pub beta: Vec<f64>,
    /// Additive per-context offsets; empty means all zero.
    #[serde(default)]
    pub context_effects: Vec<f64>,
}

impl LinearReward {
    pub fn new(beta0: f64, beta: Vec<f64>) -> Self {
        Self { beta0, beta, context_effects: Vec::new() }
    }
}

/// Data-generating mean reward `m₂(z, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanModel {
    Linear(LinearReward),
    /// ReLU network on the embedding alone.
    Mlp(Mlp),
}

impl MeanModel {
    pub fn evaluate(&self, z: &[f64], context: usize) -> f64 {
        match self {
            MeanModel::Linear(m) => {
                let offset = m.context_effects.get(context).copied().unwrap_or(0.0);
                m.beta0 + offset + m.beta.iter().zip(z).map(|(b, v)| b * v).sum::<f64>()
            }
            MeanModel::Mlp(net) => net.eval(z),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            MeanModel::Linear(m) => m.beta.len(),
            MeanModel::Mlp(net) => net.input_dim(),
        }
    }
}

/// Mean model plus Gaussian reward noise with standard deviation `noise_sd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub mean: MeanModel,
    pub noise_sd: f64,
}

/// Population standard deviation of `m₂(Z, x)` with each cell weighted
/// equally and `Z` uniform over the cell's pool.
pub fn sigma1_of(db: &ResponseDatabase, mean: &MeanModel) -> Result<f64> {
    let mut first = 0.0;
    let mut second = 0.0;
    let cells = (db.n_contexts() * db.n_actions()) as f64;
    for c in 0..db.n_contexts() {
        for a in 0..db.n_actions() {
            let pool = db.pool(c, a)?;
            let (mut s1, mut s2) = (0.0, 0.0);
            for z in pool.truths() {
                let v = mean.evaluate(z, c);
                s1 += v;
                s2 += v * v;
            }
            first += s1 / pool.len() as f64;
            second += s2 / pool.len() as f64;
        }
    }
    let (m1, m2) = (first / cells, second / cells);
    Ok((m2 - m1 * m1).max(0.0).sqrt())
}
