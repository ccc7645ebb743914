use serde::{Deserialize, Serialize};

use super::{MeanModel, ResponseDatabase};
use crate::linalg::argmax;
use crate::Result;

/// Exact expected reward of every cell and the best action per context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTable {
    n_actions: usize,
    mu: Vec<f64>,
    a_star: Vec<usize>,
}

impl OracleTable {
    pub fn mu(&self, context: usize, action: usize) -> f64 {
        self.mu[context * self.n_actions + action]
    }

    pub fn a_star(&self, context: usize) -> usize {
        self.a_star[context]
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_contexts(&self) -> usize {
        self.a_star.len()
    }

    /// `mu[x, a*] − mu[x, a]`.
    pub fn gap(&self, context: usize, action: usize) -> f64 {
        self.mu(context, self.a_star(context)) - self.mu(context, action)
    }

    /// Mean reward of each action averaged over contexts.
    pub fn action_means(&self) -> Vec<f64> {
        let c = self.n_contexts() as f64;
        (0..self.n_actions)
            .map(|a| (0..self.n_contexts()).map(|x| self.mu(x, a)).sum::<f64>() / c)
            .collect()
    }
}

/// Average `m₂` over every stored (true) sample in each cell.
pub fn oracle_table(db: &ResponseDatabase, mean: &MeanModel) -> Result<OracleTable> {
    let k = db.n_actions();
    let mut mu = Vec::with_capacity(db.n_contexts() * k);
    let mut a_star = Vec::with_capacity(db.n_contexts());
    for c in 0..db.n_contexts() {
        let row: Vec<f64> = (0..k)
            .map(|a| {
                let pool = db.pool(c, a)?;
                Ok(pool.truths().map(|z| mean.evaluate(z, c)).sum::<f64>() / pool.len() as f64)
            })
            .collect::<Result<_>>()?;
        a_star.push(argmax(&row));
        mu.extend(row);
    }
    Ok(OracleTable { n_actions: k, mu, a_star })
}
