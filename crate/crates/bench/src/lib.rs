//! Fixtures shared by the benchmarks.

use gambitts_core::env::env_step;
use gambitts_core::harness::{build_policy, Environment};
use gambitts_core::{Context, ExperimentConfig, Interaction, Policy, RngStream};
use rand::Rng;

/// Agent labels present in [`fixture_config`].
pub const AGENTS: [&str; 6] = ["std_ts", "ctx_std_ts", "fo_gambitts", "po_gambitts", "ens_fo", "ens_po"];

/// Default-sized environment (12 contexts, `k` actions, `d` dimensions)
/// with one agent of every kind.
pub fn fixture_config(k: usize, d: usize, horizon: usize) -> ExperimentConfig {
    let beta: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { 1.0 } else { -0.5 } / (1 + j / 2) as f64).collect();
    let json = format!(
        r#"{{
            "seed": 7, "T": {horizon}, "replications": 1,
            "environment": {{
                "K": {k}, "d": {d},
                "generator": {{"kind": "recipe", "seed": 1, "style_strength": 1.0, "samples_per_cell": 1000}},
                "reward_model": {{"kind": "linear", "beta0": 77.0, "beta": {beta:?}}}
            }},
            "agents": [
                {{"label": "std_ts", "kind": "std_ts"}},
                {{"label": "ctx_std_ts", "kind": "ctx_std_ts"}},
                {{"label": "fo_gambitts", "kind": "fo_gambitts"}},
                {{"label": "po_gambitts", "kind": "po_gambitts", "offline": {{"draws_per_cell": "full"}}}},
                {{"label": "ens_fo", "kind": "ens_fo", "ensemble": {{"m_ens": 10, "hidden_width": 32}}, "burn_in": 10}},
                {{"label": "ens_po", "kind": "ens_po", "offline": {{"draws_per_cell": 100}},
                  "ensemble": {{"m_ens": 10, "hidden_width": 32}}, "burn_in": 10}}
            ]
        }}"#
    );
    ExperimentConfig::from_json(&json).expect("fixture config is valid")
}

/// A policy that has already seen `warmup` interactions drawn from the
/// environment, plus the context it will be asked about.
pub fn warmed_policy(cfg: &ExperimentConfig, env: &Environment, label: &str, warmup: usize) -> (Policy, Context) {
    let agent = cfg.agent_index(label).expect("known agent label");
    let mut rng = RngStream::new(cfg.seed, agent as u64);
    let mut policy = build_policy(cfg, env, agent, 0, &mut rng).expect("policy builds");
    for t in 1..=warmup {
        let interaction = random_interaction(env, t, &mut rng);
        policy.observe(&interaction, &mut rng).expect("observe succeeds");
    }
    (policy, env.context(0).clone())
}

/// One interaction with a uniformly random action.
pub fn random_interaction(env: &Environment, t: usize, rng: &mut RngStream) -> Interaction {
    let context = env.sample_context(rng).clone();
    let action = rng.random_range(0..env.n_actions());
    let step = env_step(&env.db, &env.reward, &context, action, rng).expect("pool exists");
    Interaction { t, context, action, embedding: step.embedding, reward: step.reward }
}
