use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::std_ts::StdTs;
use super::Policy;
use crate::bayes::NigPosterior;
use crate::domain::{Context, History, Interaction};
use crate::{Error, Result};

/// Outcome distribution when no prompt is sent. The generator produces no
/// treatment in that case, so the simulation draws a plain Gaussian reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoSendBaseline {
    pub mean: f64,
    pub sd: f64,
}

impl NoSendBaseline {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sd == 0.0 {
            return self.mean;
        }
        Normal::new(self.mean, self.sd).expect("baseline sd must be finite and nonnegative").sample(rng)
    }
}

/// One record of the send/no-send history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SendRecord {
    pub t: usize,
    pub context: Context,
    pub send: bool,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub send: bool,
    /// Prompt chosen by the inner agent; `None` when nothing is sent.
    pub action: Option<usize>,
}

/// Two-level policy: a contextual two-arm Thompson sampler decides whether
/// to send at all, and an inner policy picks the prompt when it does.
///
/// Arm 0 of the primary sampler is "no send", arm 1 is "send".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionalPrompting {
    pub primary: StdTs,
    pub inner: Policy,
    pub send_history: Vec<SendRecord>,
    pub prompt_history: History,
}

impl OptionalPrompting {
    pub fn new(n_contexts: usize, prior: NigPosterior, inner: Policy) -> Self {
        Self {
            primary: StdTs::new(2, n_contexts, true, prior),
            inner,
            send_history: Vec::new(),
            prompt_history: History::new(),
        }
    }

    pub fn with_primary(primary: StdTs, inner: Policy) -> Result<Self> {
        if primary.n_actions() != 2 {
            return Err(Error::InvalidSpec("primary sampler must have exactly two arms".into()));
        }
        Ok(Self { primary, inner, send_history: Vec::new(), prompt_history: History::new() })
    }

    /// The send decision and the prompt choice draw from separate streams so
    /// the inner policy's trajectory does not depend on the primary's draws.
    pub fn decide<R: Rng + ?Sized, S: Rng + ?Sized>(
        &self,
        context: &Context,
        primary_rng: &mut R,
        inner_rng: &mut S,
    ) -> Result<Decision> {
        let send = self.primary.select(context, primary_rng) == 1;
        let action = if send { Some(self.inner.select(context, inner_rng)?) } else { None };
        Ok(Decision { send, action })
    }

    /// Record the outcome of a decision. `interaction` must be present
    /// exactly when a prompt was sent.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        t: usize,
        context: &Context,
        reward: f64,
        interaction: Option<Interaction>,
        rng: &mut R,
    ) -> Result<()> {
        let send = interaction.is_some();
        self.primary.observe(context, usize::from(send), reward);
        self.send_history.push(SendRecord { t, context: context.clone(), send, reward });
        if let Some(interaction) = interaction {
            self.inner.observe(&interaction, rng)?;
            self.prompt_history.push(interaction);
        }
        Ok(())
    }
}
