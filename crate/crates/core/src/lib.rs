//! Generator-mediated bandits with Thompson sampling.
//!
//! An agent picks a prompt (action) for a context, a generator turns the pair
//! into a stochastic treatment, and the reward depends on the treatment only
//! through a low-dimensional embedding. This crate provides:
//!
//! * [`domain`]: contexts, interactions, histories and seeded random streams,
//! * [`env`]: a response-database environment with linear or MLP rewards and
//!   exact oracle means for regret accounting,
//! * [`bayes`]: conjugate Normal–Inverse-Gamma, Bayesian linear regression and
//!   Normal–Inverse-Wishart posteriors,
//! * [`ensemble`]: a small ReLU network ensemble trained on perturbed rewards,
//! * [`agents`]: standard Thompson sampling, the fully and partially online
//!   generator-mediated samplers, their ensemble variants and the optional
//!   prompting wrapper,
//! * [`harness`]: replicated experiments, sweeps, aggregation and CSV output.

pub mod agents;
pub mod bayes;
pub mod domain;
pub mod ensemble;
pub mod env;
mod error;
pub mod harness;
pub mod linalg;

pub use agents::{ActionProbabilities, AgentConfig, AgentKind, Policy};
pub use domain::{Context, ContextSpace, Embedding, History, Interaction, RngStream};
pub use env::{OracleTable, ResponseDatabase, RewardModel};
pub use error::{Error, Result};
pub use harness::{AggregateCurve, ExperimentConfig, RegretTrajectory};

