use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SweepAxis};
use super::environment::Environment;
use crate::agents::{build_offline_model, AgentSetup, AgentSnapshot, Policy};
use crate::domain::{Context, Interaction, RngStream, StreamPurpose};
use crate::env::env_step;
use crate::Result;

/// Anything that picks actions and learns from interactions.
pub trait Learner {
    fn select(&mut self, context: &Context, rng: &mut RngStream) -> Result<usize>;
    fn observe(&mut self, interaction: &Interaction, rng: &mut RngStream) -> Result<()>;
}

impl Learner for Policy {
    fn select(&mut self, context: &Context, rng: &mut RngStream) -> Result<usize> {
        Policy::select(self, context, rng)
    }

    fn observe(&mut self, interaction: &Interaction, rng: &mut RngStream) -> Result<()> {
        Policy::observe(self, interaction, rng)
    }
}

/// Per-step regret of one run against the oracle means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrajectory {
    pub inst: Vec<f64>,
    pub cum: Vec<f64>,
}

impl RegretTrajectory {
    pub fn from_instantaneous(inst: Vec<f64>) -> Self {
        let cum = inst
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect();
        Self { inst, cum }
    }

    pub fn len(&self) -> usize {
        self.inst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inst.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }
}

/// Mean cumulative regret per step with a 95% normal-approximation
/// confidence half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCurve {
    pub agent: String,
    pub mean_cum: Vec<f64>,
    pub ci_half: Vec<f64>,
    pub n: usize,
}

impl AggregateCurve {
    /// Aggregate equal-length trajectories. With a single trajectory the
    /// half-width is 0.
    pub fn from_trajectories<'a>(agent: impl Into<String>, runs: impl IntoIterator<Item = &'a RegretTrajectory>) -> Self {
        let runs: Vec<&RegretTrajectory> = runs.into_iter().collect();
        let n = runs.len();
        let horizon = runs.first().map_or(0, |r| r.len());
        let mut mean_cum = Vec::with_capacity(horizon);
        let mut ci_half = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let mean = runs.iter().map(|r| r.cum[t]).sum::<f64>() / n as f64;
            let half = if n > 1 {
                let var = runs.iter().map(|r| (r.cum[t] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                1.96 * var.sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            mean_cum.push(mean);
            ci_half.push(half);
        }
        Self { agent: agent.into(), mean_cum, ci_half, n }
    }

    pub fn final_mean(&self) -> f64 {
        self.mean_cum.last().copied().unwrap_or(0.0)
    }

    pub fn final_ci(&self) -> f64 {
        self.ci_half.last().copied().unwrap_or(0.0)
    }
}

/// Streams of one `(replication, agent)` run.
pub struct RunStreams {
    pub contexts: RngStream,
    pub environment: RngStream,
    pub agent: RngStream,
}

impl RunStreams {
    /// The context stream ignores the agent slot, so all agents of a
    /// replication face the same context sequence.
    pub fn new(seed: u64, rep: usize, agent: usize) -> Self {
        Self {
            contexts: RngStream::replication(seed, rep, 0, StreamPurpose::Contexts),
            environment: RngStream::replication(seed, rep, agent, StreamPurpose::Environment),
            agent: RngStream::replication(seed, rep, agent, StreamPurpose::Agent),
        }
    }
}

/// Run `learner` for `horizon` steps. `on_step` is called before each
/// selection with the 1-based step index.
pub fn simulate<L: Learner>(
    env: &Environment,
    horizon: usize,
    learner: &mut L,
    streams: &mut RunStreams,
    mut on_step: impl FnMut(usize, &L),
) -> Result<RegretTrajectory> {
    let mut inst = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let context = env.sample_context(&mut streams.contexts);
        on_step(t, learner);
        let action = learner.select(context, &mut streams.agent)?;
        let step = env_step(&env.db, &env.reward, context, action, &mut streams.environment)?;
        inst.push(env.oracle.gap(context.index, action));
        let interaction = Interaction { t, context: context.clone(), action, embedding: step.embedding, reward: step.reward };
        learner.observe(&interaction, &mut streams.agent)?;
    }
    Ok(RegretTrajectory::from_instantaneous(inst))
}

/// Build the policy for agent slot `agent` in replication `rep`, including
/// any offline treatment model it needs.
pub fn build_policy(cfg: &ExperimentConfig, env: &Environment, agent: usize, rep: usize, rng: &mut RngStream) -> Result<Policy> {
    let agent_cfg = &cfg.agents[agent];
    let offline = match agent_cfg.offline_draws() {
        Some(draws) => {
            let mut off_rng = RngStream::replication(cfg.seed, rep, agent, StreamPurpose::Offline);
            Some(build_offline_model(&env.db, draws, &mut off_rng)?)
        }
        None => None,
    };
    let setup = AgentSetup {
        space: &env.space,
        n_actions: env.n_actions(),
        dim: env.visible_dim(),
        noise_sd: env.reward.noise_sd,
    };
    Policy::build(agent_cfg, &setup, offline, rng)
}

#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub agent: usize,
    pub rep: usize,
    pub trajectory: RegretTrajectory,
    pub snapshots: Vec<AgentSnapshot>,
}

/// One replication of one agent. With `snapshot_every = Some(n)` the
/// policy state before steps `1, 1 + n, 1 + 2n, …` is recorded.
pub fn run_replication(
    cfg: &ExperimentConfig,
    env: &Environment,
    agent: usize,
    rep: usize,
    snapshot_every: Option<usize>,
) -> Result<ReplicationOutput> {
    let mut streams = RunStreams::new(cfg.seed, rep, agent);
    let mut policy = build_policy(cfg, env, agent, rep, &mut streams.agent)?;
    let label = &cfg.agents[agent].label;
    let mut snapshots = Vec::new();
    let trajectory = simulate(env, cfg.horizon, &mut policy, &mut streams, |t, p| {
        if let Some(every) = snapshot_every {
            if (t - 1) % every.max(1) == 0 {
                snapshots.push(AgentSnapshot::new(label.clone(), rep, t, p.clone()));
            }
        }
    })?;
    Ok(ReplicationOutput { agent, rep, trajectory, snapshots })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub labels: Vec<String>,
    /// Sorted by agent slot, then replication.
    pub runs: Vec<ReplicationOutput>,
    pub curves: Vec<AggregateCurve>,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl ExperimentOutput {
    pub fn curve(&self, label: &str) -> Option<&AggregateCurve> {
        self.curves.iter().find(|c| c.agent == label)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with(cfg, &RunOptions::default())
}

/// All replications of all agents, in parallel on the current rayon pool.
/// Results do not depend on scheduling.
pub fn run_experiment_with(cfg: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let env = Environment::build(cfg)?;
    let tasks: Vec<(usize, usize)> =
        (0..cfg.agents.len()).flat_map(|a| (0..cfg.replications).map(move |r| (a, r))).collect();
    let mut runs = tasks
        .par_iter()
        .map(|&(a, r)| run_replication(cfg, &env, a, r, options.snapshot_every))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|o| (o.agent, o.rep));
    let curves = cfg
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| AggregateCurve::from_trajectories(a.label.clone(), runs.iter().filter(|o| o.agent == i).map(|o| &o.trajectory)))
        .collect();
    Ok(ExperimentOutput {
        labels: cfg.agents.iter().map(|a| a.label.clone()).collect(),
        runs,
        curves,
        sigma1: env.sigma1,
        sigma2: env.reward.noise_sd,
    })
}

/// One experiment per value, each with its environment rebuilt.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64], options: &RunOptions) -> Result<Vec<(f64, ExperimentOutput)>> {
    values
        .iter()
        .map(|&v| Ok((v, run_experiment_with(&cfg.with_sweep_value(axis, v)?, options)?)))
        .collect()
}

/// Values for `axis`: the config's own list when it sweeps that axis,
/// otherwise the axis default grid.
pub fn sweep_values(cfg: &ExperimentConfig, axis: SweepAxis) -> Vec<f64> {
    match &cfg.sweep {
        Some(s) if s.axis == axis => s.values.clone(),
        _ => axis.default_values(),
    }
}
