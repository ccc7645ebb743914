use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::ResponseDatabase;
use crate::Result;

/// How many simulator draws to take per `(context, action)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DrawsPerCell {
    Count(usize),
    /// Copy the whole database cell.
    Full(FullPool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullPool {
    Full,
}

impl DrawsPerCell {
    pub const FULL: DrawsPerCell = DrawsPerCell::Full(FullPool::Full);
}

/// Empirical treatment distribution per cell, built by querying the
/// generator offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineTreatmentModel {
    n_actions: usize,
    dim: usize,
    /// Row-major pools, indexed `context * n_actions + action`.
    pools: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
}

impl OfflineTreatmentModel {
    pub fn from_pools(n_actions: usize, dim: usize, pools: Vec<Vec<f64>>) -> Self {
        let means = pools
            .iter()
            .map(|p| {
                let n = (p.len() / dim.max(1)) as f64;
                let mut m = vec![0.0; dim];
                for z in p.chunks_exact(dim) {
                    m.iter_mut().zip(z).for_each(|(a, v)| *a += v);
                }
                m.iter_mut().for_each(|a| *a /= n);
                m
            })
            .collect();
        Self { n_actions, dim, pools, means }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_contexts(&self) -> usize {
        self.pools.len() / self.n_actions
    }

    /// Row-major samples for a cell.
    pub fn pool(&self, context: usize, action: usize) -> &[f64] {
        &self.pools[context * self.n_actions + action]
    }

    pub fn samples(&self, context: usize, action: usize) -> impl Iterator<Item = &[f64]> {
        self.pool(context, action).chunks_exact(self.dim)
    }

    pub fn len(&self, context: usize, action: usize) -> usize {
        self.pool(context, action).len() / self.dim
    }

    pub fn mean(&self, context: usize, action: usize) -> &[f64] {
        &self.means[context * self.n_actions + action]
    }
}

/// Query the generator `draws` times per cell (uniform with replacement),
/// keeping only agent-visible embeddings.
pub fn build_offline_model<R: Rng + ?Sized>(
    db: &ResponseDatabase,
    draws: DrawsPerCell,
    rng: &mut R,
) -> Result<OfflineTreatmentModel> {
    if let DrawsPerCell::Count(0) = draws {
        return Err(crate::Error::InvalidSpec("draws_per_cell must be at least 1".into()));
    }
    let dv = db.visible_dim();
    let mut pools = Vec::with_capacity(db.n_contexts() * db.n_actions());
    for c in 0..db.n_contexts() {
        for a in 0..db.n_actions() {
            let pool = db.pool(c, a)?;
            let mut values = Vec::new();
            match draws {
                DrawsPerCell::Count(n) => {
                    for _ in 0..n {
                        values.extend_from_slice(pool.visible(rng.random_range(0..pool.len())));
                    }
                }
                DrawsPerCell::Full(_) => {
                    for i in 0..pool.len() {
                        values.extend_from_slice(pool.visible(i));
                    }
                }
            }
            pools.push(values);
        }
    }
    Ok(OfflineTreatmentModel::from_pools(db.n_actions(), dv, pools))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RngStream;
    use crate::env::{build_database, CellGaussian, ResponseDatabase, SyntheticGeneratorSpec};

    fn db() -> ResponseDatabase {
        let spec = SyntheticGeneratorSpec {
            n_contexts: 3,
            n_actions: 2,
            dim: 2,
            cells: (0..6)
                .map(|i| CellGaussian { mean: vec![i as f64, -(i as f64)], cov: vec![1.0, 0.0, 0.0, 4.0] })
                .collect(),
            samples_per_cell: 500,
        };
        build_database(&spec, &mut RngStream::new(1, 0)).unwrap()
    }

    #[test]
    fn fifty_draws_per_cell() {
        let m = build_offline_model(&db(), DrawsPerCell::Count(50), &mut RngStream::new(2, 0)).unwrap();
        for c in 0..3 {
            for a in 0..2 {
                assert_eq!(m.len(c, a), 50);
            }
        }
    }

    #[test]
    fn full_copy_mode() {
        let base = db();
        let m = build_offline_model(&base, DrawsPerCell::FULL, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(m.len(2, 1), 500);
        let pool = base.pool(2, 1).unwrap();
        assert_eq!(m.samples(2, 1).nth(17).unwrap(), pool.visible(17));
        assert!(build_offline_model(&base, DrawsPerCell::Count(0), &mut RngStream::new(3, 0)).is_err());
    }

    #[test]
    fn pool_mean_within_clt_bound() {
        let n = 400;
        let m = build_offline_model(&db(), DrawsPerCell::Count(n), &mut RngStream::new(4, 0)).unwrap();
        // Resampling from a 500-sample pool adds the pool's own sampling error,
        // so the bound uses both: sd·sqrt(1/n + 1/500).
        for (c, a) in [(0, 0), (1, 1), (2, 0)] {
            let i = (c * 2 + a) as f64;
            let mean = m.mean(c, a);
            let se = |sd: f64| sd * (1.0 / n as f64 + 1.0 / 500.0).sqrt();
            assert!((mean[0] - i).abs() < 4.0 * se(1.0));
            assert!((mean[1] + i).abs() < 4.0 * se(2.0));
        }
    }

    #[test]
    fn draws_count_parses() {
        let full: DrawsPerCell = serde_json::from_str("\"full\"").unwrap();
        assert_eq!(full, DrawsPerCell::FULL);
        let n: DrawsPerCell = serde_json::from_str("50").unwrap();
        assert_eq!(n, DrawsPerCell::Count(50));
    }
}
