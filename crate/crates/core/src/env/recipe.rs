use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CellGaussian, MeanModel, SyntheticGeneratorSpec};
use crate::domain::{ContextSpace, RngStream};
use crate::{Error, Result};

/// Parametric family of synthetic generators.
///
/// A master list of `n_prompts` prompts is drawn once: every prompt gets a
/// base mean embedding and every `(context, prompt)` pair a perturbation of
/// it. Prompts come in high/low pairs per style coordinate: prompt `p`
/// shifts coordinate `p / 2` by `+style_strength` (even `p`) or
/// `-style_strength` (odd `p`), and targets nothing when `p / 2 >= d`.
/// An experiment with `K` actions keeps `K` prompts spread evenly over
/// the master list ranked by context-averaged expected reward (lowest,
/// highest and evenly spaced ranks in between), in a seeded random order.
///
/// Embedding coordinate `j` is always drawn from its own stream, so the
/// first `d` coordinates do not depend on how many more are requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorRecipe {
    pub seed: u64,
    pub n_prompts: usize,
    /// Shift of a prompt's target coordinate.
    pub style_strength: f64,
    /// Spread of prompt base means.
    pub prompt_sd: f64,
    /// Spread of per-context shifts around a prompt's base mean.
    pub context_sd: f64,
    /// Within-cell standard deviation of each coordinate.
    pub within_sd: f64,
    /// Within-cell correlation between coordinates.
    pub within_corr: f64,
    pub samples_per_cell: usize,
}

impl Default for GeneratorRecipe {
    fn default() -> Self {
        Self {
            seed: 1,
            n_prompts: 40,
            style_strength: 0.0,
            prompt_sd: 1.0,
            context_sd: 0.3,
            within_sd: 1.0,
            within_corr: 0.0,
            samples_per_cell: 1000,
        }
    }
}

impl GeneratorRecipe {
    /// Per-prompt, per-context mean embeddings: `means[p][x]` has length `d`.
    fn master_means(&self, n_contexts: usize, d: usize) -> Vec<Vec<Vec<f64>>> {
        let mut means = vec![vec![vec![0.0; d]; n_contexts]; self.n_prompts];
        for j in 0..d {
            let mut rng = RngStream::new(self.seed, 1 << 32 | j as u64);
            for (p, prompt) in means.iter_mut().enumerate() {
                let style = match (p / 2 == j, p % 2) {
                    (true, 0) => self.style_strength,
                    (true, _) => -self.style_strength,
                    (false, _) => 0.0,
                };
                let base = style + self.prompt_sd * rng.sample::<f64, _>(StandardNormal);
                for cell in prompt.iter_mut() {
                    cell[j] = base + self.context_sd * rng.sample::<f64, _>(StandardNormal);
                }
            }
        }
        means
    }

    /// Prompt indices kept for `k` actions, in action order.
    pub fn select_prompts(&self, n_contexts: usize, k: usize, d: usize, mean: &MeanModel) -> Result<Vec<usize>> {
        if k < 1 || k > self.n_prompts {
            return Err(Error::InvalidSpec(format!("K = {k} must lie in 1..={}", self.n_prompts)));
        }
        let means = self.master_means(n_contexts, d);
        let value: Vec<f64> = means
            .iter()
            .map(|p| p.iter().enumerate().map(|(x, m)| mean.evaluate(m, x)).sum::<f64>() / n_contexts as f64)
            .collect();
        let mut ranked: Vec<usize> = (0..self.n_prompts).collect();
        ranked.sort_by(|&a, &b| value[a].total_cmp(&value[b]).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = if k == 1 {
            vec![ranked[self.n_prompts - 1]]
        } else {
            (0..k)
                .map(|i| {
                    let pos = (i as f64 * (self.n_prompts - 1) as f64 / (k - 1) as f64).round() as usize;
                    ranked[pos]
                })
                .collect()
        };
        chosen.shuffle(&mut RngStream::new(self.seed, 2 << 32 | k as u64));
        Ok(chosen)
    }

    pub fn to_spec(&self, space: &ContextSpace, k: usize, d: usize, mean: &MeanModel) -> Result<SyntheticGeneratorSpec> {
        if mean.input_dim() != d {
            return Err(Error::InvalidSpec(format!(
                "reward model takes {} inputs but d = {d}",
                mean.input_dim()
            )));
        }
        let n_contexts = space.size();
        let chosen = self.select_prompts(n_contexts, k, d, mean)?;
        let means = self.master_means(n_contexts, d);
        let var = self.within_sd * self.within_sd;
        let cov: Vec<f64> = (0..d * d)
            .map(|i| if i / d == i % d { var } else { var * self.within_corr })
            .collect();
        let mut cells = Vec::with_capacity(n_contexts * k);
        for x in 0..n_contexts {
            for &p in &chosen {
                cells.push(CellGaussian { mean: means[p][x].clone(), cov: cov.clone() });
            }
        }
        Ok(SyntheticGeneratorSpec {
            n_contexts,
            n_actions: k,
            dim: d,
            cells,
            samples_per_cell: self.samples_per_cell,
        })
    }
}
