//! Experiment orchestration: configuration, replicated runs with regret
//! against the oracle, aggregation with confidence intervals, sweeps and
//! CSV output.
//!
//! Replication `r` of agent slot `i` draws from streams keyed by
//! `(seed, r, i, purpose)`, and the context stream ignores `i`, so every
//! agent in a replication sees the same contexts. Adding replications
//! never changes earlier ones.

mod config;
mod environment;
mod output;
mod probs;
mod run;

pub use config::{EnvironmentConfig, ExperimentConfig, GeneratorSource, RewardSpec, SweepAxis, SweepConfig};
pub use environment::Environment;
pub use output::{
    curves_from_agg, read_agg, read_probs, read_raw, trajectories_from_raw, write_agg, write_experiment,
    write_probs, write_raw, AggRow, ProbRow, RawRow,
};
pub use probs::snapshot_probabilities;
pub use run::{
    build_policy, run_experiment, run_experiment_with, run_replication, simulate, sweep, sweep_values,
    AggregateCurve, ExperimentOutput, Learner, RegretTrajectory, ReplicationOutput, RunOptions, RunStreams,
};
