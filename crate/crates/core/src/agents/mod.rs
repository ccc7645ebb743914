//! Bandit policies: reward-only Thompson sampling, the generator-mediated
//! samplers, the optional-prompting wrapper, and the randomisation
//! probability estimator.

mod gambitts;
mod offline;
mod optional;
mod std_ts;

pub use gambitts::{EnsembleLearner, Gambitts, Integration, RewardLearner, TreatmentModel};
pub use offline::{build_offline_model, DrawsPerCell, FullPool, OfflineTreatmentModel};
pub use optional::{Decision, NoSendBaseline, OptionalPrompting, SendRecord};
pub use std_ts::StdTs;

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::{BlrPosterior, NigPosterior, NiwPosterior};
use crate::domain::{Context, ContextSpace, Interaction};
use crate::ensemble::EnsembleConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    StdTs,
    CtxStdTs,
    FoGambitts,
    PoGambitts,
    EnsFo,
    EnsPo,
}

impl AgentKind {
    pub fn uses_offline(self) -> bool {
        matches!(self, AgentKind::PoGambitts | AgentKind::EnsPo)
    }

    pub fn uses_ensemble(self) -> bool {
        matches!(self, AgentKind::EnsFo | AgentKind::EnsPo)
    }
}

/// Hyperparameters of every prior used by the agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    /// Normal–Inverse-Gamma prior on a single arm's reward.
    pub reward_mean: f64,
    pub reward_kappa: f64,
    pub reward_alpha: f64,
    pub reward_beta: f64,
    /// Gaussian prior on the linear reward coefficients.
    pub intercept_mean: f64,
    pub intercept_var: f64,
    pub slope_var: f64,
    /// Normal–Inverse-Wishart prior on each cell's embedding distribution:
    /// mean 0, scale matrix `niw_scale * I`, `d + niw_extra_dof` degrees of
    /// freedom.
    pub niw_kappa: f64,
    pub niw_scale: f64,
    pub niw_extra_dof: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            reward_mean: 77.0,
            reward_kappa: 1.0,
            reward_alpha: 1.0,
            reward_beta: 10.0,
            intercept_mean: 77.0,
            intercept_var: 1e-2,
            slope_var: 1.0,
            niw_kappa: 1.0,
            niw_scale: 1.0,
            niw_extra_dof: 2.0,
        }
    }
}

impl Priors {
    pub fn nig(&self) -> NigPosterior {
        NigPosterior::new(self.reward_mean, self.reward_kappa, self.reward_alpha, self.reward_beta)
    }

    pub fn blr(&self, d: usize, noise_sd: f64) -> Result<BlrPosterior> {
        BlrPosterior::isotropic_prior(d, self.intercept_mean, self.intercept_var, self.slope_var, noise_sd)
    }

    pub fn niw(&self, d: usize) -> Result<NiwPosterior> {
        NiwPosterior::new(
            nalgebra::DVector::zeros(d),
            self.niw_kappa,
            nalgebra::DMatrix::identity(d, d) * self.niw_scale,
            d as f64 + self.niw_extra_dof,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineSpec {
    pub draws_per_cell: DrawsPerCell,
}

/// Fit the online treatment model to offline draws before deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainSpec {
    pub draws_per_cell: DrawsPerCell,
    #[serde(default)]
    pub theta1_frozen_after_pretrain: bool,
}

fn default_mc_samples() -> usize {
    100
}

fn default_burn_in() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub label: String,
    pub kind: AgentKind,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default)]
    pub offline: Option<OfflineSpec>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub pretrain: Option<PretrainSpec>,
}

impl AgentConfig {
    pub fn new(label: impl Into<String>, kind: AgentKind) -> Self {
        Self {
            label: label.into(),
            kind,
            mc_samples: default_mc_samples(),
            integration: Integration::default(),
            offline: kind.uses_offline().then_some(OfflineSpec { draws_per_cell: DrawsPerCell::FULL }),
            ensemble: kind.uses_ensemble().then(EnsembleConfig::default),
            burn_in: default_burn_in(),
            priors: Priors::default(),
            pretrain: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidSpec(format!("agent '{}': {msg}", self.label)));
        if self.offline.is_some() != self.kind.uses_offline() {
            return fail("offline settings are required for po_gambitts and ens_po and allowed nowhere else");
        }
        if self.ensemble.is_some() != self.kind.uses_ensemble() {
            return fail("ensemble settings are required for ens_fo and ens_po and allowed nowhere else");
        }
        if self.pretrain.is_some() && self.kind != AgentKind::FoGambitts {
            return fail("pretraining applies to fo_gambitts only");
        }
        if self.mc_samples == 0 {
            return fail("mc_samples must be positive");
        }
        if let Some(e) = &self.ensemble {
            e.validate()?;
        }
        Ok(())
    }

    /// Offline draws this agent needs from the generator, if any.
    pub fn offline_draws(&self) -> Option<DrawsPerCell> {
        self.offline.map(|o| o.draws_per_cell).or(self.pretrain.map(|p| p.draws_per_cell))
    }
}

/// What a policy needs to know about its environment.
#[derive(Debug, Clone)]
pub struct AgentSetup<'a> {
    pub space: &'a ContextSpace,
    pub n_actions: usize,
    /// Dimension of the embedding the agent observes.
    pub dim: usize,
    /// Known reward noise sd.
    pub noise_sd: f64,
}

/// Any policy the harness can run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    StdTs(StdTs),
    Gambitts(Box<Gambitts>),
}

impl Policy {
    /// Initialise from a config. `offline` must be supplied when
    /// [`AgentConfig::offline_draws`] is `Some`.
    pub fn build<R: Rng + ?Sized>(
        cfg: &AgentConfig,
        setup: &AgentSetup<'_>,
        offline: Option<OfflineTreatmentModel>,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let k = setup.n_actions;
        let n_contexts = setup.space.size();
        let d = setup.dim;
        let need_offline = || Error::InvalidSpec(format!("agent '{}' needs an offline treatment model", cfg.label));
        let online = |pretrain: Option<&OfflineTreatmentModel>, frozen: bool| -> Result<TreatmentModel> {
            let prior = cfg.priors.niw(d)?;
            let mut cells = Vec::with_capacity(n_contexts * k);
            for c in 0..n_contexts {
                for a in 0..k {
                    cells.push(match pretrain {
                        Some(m) => prior.update(&m.samples(c, a).map(<[f64]>::to_vec).collect::<Vec<_>>()),
                        None => prior.clone(),
                    });
                }
            }
            Ok(TreatmentModel::Online { cells, frozen })
        };
        let ensemble = |rng: &mut R| -> Result<RewardLearner> {
            let e = cfg.ensemble.clone().unwrap_or_default();
            let sizes = setup.space.factors().iter().map(|f| f.levels.len()).collect();
            let perturb = e.perturb_sd.unwrap_or(setup.noise_sd);
            Ok(RewardLearner::Ensemble(EnsembleLearner::new(e, d, sizes, perturb, cfg.burn_in, rng)?))
        };
        let gambitts = |treatment, reward| {
            Policy::Gambitts(Box::new(Gambitts {
                n_actions: k,
                treatment,
                reward,
                integration: cfg.integration,
                mc_samples: cfg.mc_samples,
            }))
        };
        if let Some(m) = &offline {
            if m.dim() != d || m.n_actions() != k || m.n_contexts() != n_contexts {
                return Err(Error::InvalidSpec(format!(
                    "offline model for agent '{}' does not match the environment shape",
                    cfg.label
                )));
            }
        }
        Ok(match cfg.kind {
            AgentKind::StdTs => Policy::StdTs(StdTs::new(k, n_contexts, false, cfg.priors.nig())),
            AgentKind::CtxStdTs => Policy::StdTs(StdTs::new(k, n_contexts, true, cfg.priors.nig())),
            AgentKind::FoGambitts => {
                let treatment = match cfg.pretrain {
                    Some(p) => online(Some(offline.as_ref().ok_or_else(need_offline)?), p.theta1_frozen_after_pretrain)?,
                    None => online(None, false)?,
                };
                gambitts(treatment, RewardLearner::Linear(cfg.priors.blr(d, setup.noise_sd)?))
            }
            AgentKind::PoGambitts => gambitts(
                TreatmentModel::Offline(offline.ok_or_else(need_offline)?),
                RewardLearner::Linear(cfg.priors.blr(d, setup.noise_sd)?),
            ),
            AgentKind::EnsFo => {
                let reward = ensemble(rng)?;
                gambitts(online(None, false)?, reward)
            }
            AgentKind::EnsPo => {
                let treatment = TreatmentModel::Offline(offline.ok_or_else(need_offline)?);
                gambitts(treatment, ensemble(rng)?)
            }
        })
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::StdTs(p) => p.n_actions(),
            Policy::Gambitts(p) => p.n_actions,
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, context: &Context, rng: &mut R) -> Result<usize> {
        match self {
            Policy::StdTs(p) => Ok(p.select(context, rng)),
            Policy::Gambitts(p) => p.select(context, rng),
        }
    }

    pub fn observe<R: Rng + ?Sized>(&mut self, interaction: &Interaction, rng: &mut R) -> Result<()> {
        match self {
            Policy::StdTs(p) => {
                p.observe(&interaction.context, interaction.action, interaction.reward);
                Ok(())
            }
            Policy::Gambitts(p) => p.observe(interaction, rng),
        }
    }
}

/// Selection probabilities of a frozen policy in one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProbabilities {
    pub probs: Vec<f64>,
}

/// Estimate selection probabilities by repeating the policy's full
/// posterior-sampling selection `n_outer` times.
pub fn action_probabilities<R: Rng + ?Sized>(
    policy: &Policy,
    context: &Context,
    n_outer: usize,
    rng: &mut R,
) -> Result<ActionProbabilities> {
    if n_outer == 0 {
        return Err(Error::InvalidInput("n_outer must be at least 1".into()));
    }
    let mut counts = vec![0u64; policy.n_actions()];
    for _ in 0..n_outer {
        counts[policy.select(context, rng)?] += 1;
    }
    Ok(ActionProbabilities { probs: counts.iter().map(|&c| c as f64 / n_outer as f64).collect() })
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// A frozen policy state, written one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub version: u32,
    pub label: String,
    pub rep: usize,
    /// 1-based decision step the frozen state governs.
    pub t: usize,
    pub policy: Policy,
}

impl AgentSnapshot {
    pub fn new(label: impl Into<String>, rep: usize, t: usize, policy: Policy) -> Self {
        Self { version: SNAPSHOT_VERSION, label: label.into(), rep, t, policy }
    }

    pub fn write_line<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_all<B: BufRead>(input: B) -> Result<Vec<Self>> {
        let mut snaps = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let snap: AgentSnapshot = serde_json::from_str(&line)
                .map_err(|e| Error::InvalidInput(format!("snapshot line {}: {e}", i + 1)))?;
            if snap.version != SNAPSHOT_VERSION {
                return Err(Error::InvalidInput(format!(
                    "snapshot version {} is not supported (expected {SNAPSHOT_VERSION})",
                    snap.version
                )));
            }
            snaps.push(snap);
        }
        Ok(snaps)
    }
}
