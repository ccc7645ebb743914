use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ResponseDatabase;
use crate::{Error, Result};

/// Agent-visible embedding `w·(M z) + (1 − w)·u`, where `u` is an
/// independent alternative embedding: a per-cell offset drawn from
/// `N(0, offset_sd²)` plus per-sample `N(0, noise_sd²)` noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecSpec {
    pub weight: f64,
    /// Rows of `M` (`visible_dim × d`); identity when absent.
    #[serde(default)]
    pub map: Option<Vec<Vec<f64>>>,
    pub noise_sd: f64,
    #[serde(default)]
    pub offset_sd: f64,
}

impl MisspecSpec {
    pub fn mixing(weight: f64, noise_sd: f64, offset_sd: f64) -> Self {
        Self { weight, map: None, noise_sd, offset_sd }
    }
}

/// Pair every stored sample with a transformed, agent-visible embedding.
/// Rewards keep using the original embeddings.
///
/// The alternative embedding is drawn the same way for every `weight`, so
/// equal streams give nested misspecification levels.
pub fn misspecify_embedding<R: Rng + ?Sized>(
    db: &ResponseDatabase,
    spec: &MisspecSpec,
    rng: &mut R,
) -> Result<ResponseDatabase> {
    let d = db.dim();
    let map = match &spec.map {
        Some(rows) => {
            if rows.is_empty() || rows.iter().any(|r| r.len() != d) {
                return Err(Error::InvalidSpec(format!("embedding map rows must have length {d}")));
            }
            rows.clone()
        }
        None => (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
    };
    if !(0.0..=1.0).contains(&spec.weight) || spec.noise_sd < 0.0 || spec.offset_sd < 0.0 {
        return Err(Error::InvalidSpec("weight must lie in [0, 1] and scales must be nonnegative".into()));
    }
    let dv = map.len();
    let w = spec.weight;
    Ok(db.map_pools(|_, _, pool| {
        let offset: Vec<f64> = (0..dv)
            .map(|_| spec.offset_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut values = Vec::with_capacity(pool.len() * dv);
        for i in 0..pool.len() {
            let z = pool.truth(i);
            for (row, off) in map.iter().zip(&offset) {
                let mapped: f64 = row.iter().zip(z).map(|(m, v)| m * v).sum();
                let alt = off + spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
                values.push(w * mapped + (1.0 - w) * alt);
            }
        }
        pool.with_visible(dv, values)
    }))
}
