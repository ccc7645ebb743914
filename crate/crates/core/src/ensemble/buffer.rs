use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub features: Vec<f64>,
    pub reward: f64,
    /// Seed of this entry's per-member reward perturbations.
    pub seed: u64,
}

/// Fixed-capacity FIFO of training examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<ReplayEntry>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self { capacity, entries: VecDeque::with_capacity(capacity) }
    }

    /// Appends an entry, evicting the oldest one when full.
    pub fn push<R: Rng + ?Sized>(&mut self, features: Vec<f64>, reward: f64, rng: &mut R) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(ReplayEntry { features, reward, seed: rng.random() });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &ReplayEntry {
        &self.entries[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayEntry> {
        self.entries.iter()
    }

    /// Training target of entry `i` for member `j`.
    pub fn target(&self, i: usize, j: usize, perturb_sd: f64, offset: f64) -> f64 {
        let e = &self.entries[i];
        e.reward - offset + perturb_sd * perturbation(e.seed, j)
    }
}

/// Standard normal draw determined by `(seed, member)`.
pub fn perturbation(seed: u64, member: usize) -> f64 {
    let key = seed ^ (member as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    Pcg64Mcg::seed_from_u64(key).sample(StandardNormal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RngStream;

    #[test]
    fn fifo_eviction() {
        let mut rng = RngStream::new(1, 0);
        let mut buf = ReplayBuffer::new(5);
        for i in 0..8 {
            buf.push(vec![i as f64], i as f64, &mut rng);
        }
        assert_eq!(buf.len(), 5);
        let rewards: Vec<f64> = buf.iter().map(|e| e.reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn perturbations_look_standard_normal() {
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|i| perturbation(i as u64 * 7919, i % 60)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }
}
