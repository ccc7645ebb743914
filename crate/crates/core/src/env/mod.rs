//! The generator-mediated environment.
//!
//! A [`ResponseDatabase`] stands in for the generator: each `(context,
//! action)` cell holds a pool of pre-sampled treatment embeddings. A step
//! draws one pooled sample uniformly with replacement and scores it with a
//! [`RewardModel`] plus Gaussian noise. The [`OracleTable`] holds the exact
//! pool-averaged mean reward of every cell.

mod database;
mod misspec;
mod oracle;
mod recipe;
mod reward;

pub use database::{build_database, CellGaussian, Pool, ResponseDatabase, SyntheticGeneratorSpec};
pub use misspec::{misspecify_embedding, MisspecSpec};
pub use oracle::{oracle_table, OracleTable};
pub use recipe::GeneratorRecipe;
pub use reward::{sigma1_of, LinearReward, MeanModel, RewardModel};

use rand::Rng;

use crate::domain::{Context, Embedding};
use crate::Result;

/// Outcome of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// Index of the drawn sample within its cell.
    pub sample: usize,
    /// Agent-visible embedding.
    pub embedding: Embedding,
    pub reward: f64,
}

/// Draw a response for `(context, action)` and simulate its reward.
///
/// The reward uses the true embedding; the returned embedding is the
/// agent-visible one (they differ only after [`misspecify_embedding`]).
pub fn env_step<R: Rng + ?Sized>(
    db: &ResponseDatabase,
    reward: &RewardModel,
    context: &Context,
    action: usize,
    rng: &mut R,
) -> Result<Step> {
    let pool = db.pool(context.index, action)?;
    let sample = rng.random_range(0..pool.len());
    let mean = reward.mean.evaluate(pool.truth(sample), context.index);
    let noise = if reward.noise_sd > 0.0 {
        reward.noise_sd * rng.sample::<f64, _>(rand_distr::StandardNormal)
    } else {
        0.0
    };
    Ok(Step {
        sample,
        embedding: Embedding(pool.visible(sample).to_vec()),
        reward: mean + noise,
    })
}
