use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::NigPosterior;
use crate::domain::Context;
use crate::linalg::argmax;

/// Gaussian Thompson sampling on rewards alone, optionally indexed by
/// context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdTs {
    n_actions: usize,
    contextual: bool,
    posteriors: Vec<NigPosterior>,
}

impl StdTs {
    pub fn new(n_actions: usize, n_contexts: usize, contextual: bool, prior: NigPosterior) -> Self {
        let cells = if contextual { n_actions * n_contexts } else { n_actions };
        Self { n_actions, contextual, posteriors: vec![prior; cells] }
    }

    /// Arms with explicit posteriors (non-contextual).
    pub fn from_posteriors(posteriors: Vec<NigPosterior>) -> Self {
        Self { n_actions: posteriors.len(), contextual: false, posteriors }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn offset(&self, context: &Context) -> usize {
        if self.contextual {
            context.index * self.n_actions
        } else {
            0
        }
    }

    pub fn posterior(&self, context: &Context, action: usize) -> &NigPosterior {
        &self.posteriors[self.offset(context) + action]
    }

    pub fn select<R: Rng + ?Sized>(&self, context: &Context, rng: &mut R) -> usize {
        let base = self.offset(context);
        let draws: Vec<f64> = self.posteriors[base..base + self.n_actions]
            .iter()
            .map(|p| p.sample(rng).0)
            .collect();
        argmax(&draws)
    }

    pub fn observe(&mut self, context: &Context, action: usize, reward: f64) {
        let i = self.offset(context) + action;
        self.posteriors[i].observe(reward);
    }
}
