use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::offline::OfflineTreatmentModel;
use crate::bayes::{BlrPosterior, NiwPosterior};
use crate::domain::{Context, Interaction};
use crate::ensemble::{self, EnsembleConfig, Mlp, ReplayBuffer};
use crate::linalg::argmax;
use crate::{Error, Result};

/// How the per-arm integral of the reward model over the treatment
/// distribution is evaluated when the treatment model is a Gaussian.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    /// Exact for a linear reward model: evaluate it at the sampled mean.
    #[default]
    ClosedForm,
    /// Average over `mc_samples` treatment draws.
    MonteCarlo,
}

/// First-stage model of `Z | A, X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentModel {
    /// Per-cell Normal–Inverse-Wishart posteriors learned from interactions.
    Online {
        cells: Vec<NiwPosterior>,
        /// When set, interactions no longer update the cells.
        frozen: bool,
    },
    /// Empirical distribution from simulator access.
    Offline(OfflineTreatmentModel),
}

/// Second-stage model of `E[Y | Z, X]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardLearner {
    Linear(BlrPosterior),
    Ensemble(EnsembleLearner),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleLearner {
    pub cfg: EnsembleConfig,
    pub members: Vec<Mlp>,
    pub buffer: ReplayBuffer,
    pub perturb_sd: f64,
    pub burn_in: usize,
    pub observed: usize,
    /// Level count of each context factor, for the one-hot encoding.
    pub factor_sizes: Vec<usize>,
}

impl EnsembleLearner {
    pub fn new<R: Rng + ?Sized>(
        cfg: EnsembleConfig,
        dim: usize,
        factor_sizes: Vec<usize>,
        perturb_sd: f64,
        burn_in: usize,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let input = dim + factor_sizes.iter().sum::<usize>();
        let members = ensemble::init_ensemble(&cfg, input, rng);
        let buffer = ReplayBuffer::new(cfg.buffer_capacity);
        Ok(Self { cfg, members, buffer, perturb_sd, burn_in, observed: 0, factor_sizes })
    }

    /// `z` followed by a per-factor one-hot encoding of the context.
    pub fn features(&self, z: &[f64], context: &Context, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(z);
        for (&n, &l) in self.factor_sizes.iter().zip(&context.levels) {
            out.extend((0..n).map(|i| if i == l { 1.0 } else { 0.0 }));
        }
    }

    /// Prediction of member `j`, on the reward scale.
    pub fn predict(&self, j: usize, features: &[f64]) -> f64 {
        self.members[j].eval(features) + self.cfg.reward_offset
    }

    fn observe<R: Rng + ?Sized>(&mut self, z: &[f64], context: &Context, reward: f64, rng: &mut R) {
        let mut features = Vec::new();
        self.features(z, context, &mut features);
        self.buffer.push(features, reward, rng);
        self.observed += 1;
        if self.observed > self.burn_in {
            for _ in 0..self.cfg.steps_per_update {
                ensemble::train_step(&mut self.members, &self.buffer, &self.cfg, self.perturb_sd, rng);
            }
        }
    }
}

/// Sampled second-stage parameters for one decision.
enum RewardDraw {
    Linear(DVector<f64>),
    Member(usize),
}

/// Generator-mediated Thompson sampler: a treatment model and a reward
/// model, combined by integrating the sampled reward model over the sampled
/// (or empirical) treatment distribution of each arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gambitts {
    pub n_actions: usize,
    pub treatment: TreatmentModel,
    pub reward: RewardLearner,
    pub integration: Integration,
    pub mc_samples: usize,
}

fn linear_value(beta: &DVector<f64>, z: &[f64]) -> f64 {
    beta[0] + beta.iter().skip(1).zip(z).map(|(b, v)| b * v).sum::<f64>()
}

impl Gambitts {
    /// Per-arm expected rewards under one posterior draw.
    pub fn expected_rewards<R: Rng + ?Sized>(&self, context: &Context, rng: &mut R) -> Result<Vec<f64>> {
        let draw = match &self.reward {
            RewardLearner::Linear(blr) => RewardDraw::Linear(blr.sample(rng)?),
            RewardLearner::Ensemble(e) => RewardDraw::Member(rng.random_range(0..e.members.len())),
        };
        self.arm_values(context, &draw, rng)
    }

    fn arm_values<R: Rng + ?Sized>(&self, context: &Context, draw: &RewardDraw, rng: &mut R) -> Result<Vec<f64>> {
        let mut features = Vec::new();
        let mut values = Vec::with_capacity(self.n_actions);
        for a in 0..self.n_actions {
            let value = match &self.treatment {
                TreatmentModel::Online { cells, .. } => {
                    let cell = cells
                        .get(context.index * self.n_actions + a)
                        .ok_or(Error::MissingCell { context: context.index, action: a })?;
                    let theta1 = cell.sample(rng)?;
                    match (draw, &self.reward) {
                        (RewardDraw::Linear(beta), _) if self.integration == Integration::ClosedForm => {
                            linear_value(beta, theta1.mean.as_slice())
                        }
                        (RewardDraw::Linear(beta), _) => {
                            let mut acc = 0.0;
                            for _ in 0..self.mc_samples {
                                acc += linear_value(beta, theta1.sample_point(rng).as_slice());
                            }
                            acc / self.mc_samples as f64
                        }
                        (RewardDraw::Member(j), RewardLearner::Ensemble(e)) => {
                            let mut acc = 0.0;
                            for _ in 0..self.mc_samples {
                                let z = theta1.sample_point(rng);
                                e.features(z.as_slice(), context, &mut features);
                                acc += e.predict(*j, &features);
                            }
                            acc / self.mc_samples as f64
                        }
                        (RewardDraw::Member(_), RewardLearner::Linear(_)) => unreachable!(),
                    }
                }
                TreatmentModel::Offline(model) => match (draw, &self.reward) {
                    (RewardDraw::Linear(beta), _) => linear_value(beta, model.mean(context.index, a)),
                    (RewardDraw::Member(j), RewardLearner::Ensemble(e)) => {
                        let mut acc = 0.0;
                        for z in model.samples(context.index, a) {
                            e.features(z, context, &mut features);
                            acc += e.predict(*j, &features);
                        }
                        acc / model.len(context.index, a) as f64
                    }
                    (RewardDraw::Member(_), RewardLearner::Linear(_)) => unreachable!(),
                },
            };
            values.push(value);
        }
        Ok(values)
    }

    pub fn select<R: Rng + ?Sized>(&self, context: &Context, rng: &mut R) -> Result<usize> {
        Ok(argmax(&self.expected_rewards(context, rng)?))
    }

    pub fn observe<R: Rng + ?Sized>(&mut self, interaction: &Interaction, rng: &mut R) -> Result<()> {
        let z = interaction.embedding.as_slice();
        if let TreatmentModel::Online { cells, frozen } = &mut self.treatment {
            if !*frozen {
                let i = interaction.context.index * self.n_actions + interaction.action;
                let cell = cells.get_mut(i).ok_or(Error::MissingCell {
                    context: interaction.context.index,
                    action: interaction.action,
                })?;
                if cell.dim() != z.len() {
                    return Err(Error::InvalidInput(format!(
                        "embedding has dimension {}, expected {}",
                        z.len(),
                        cell.dim()
                    )));
                }
                cell.observe(z);
            }
        }
        match &mut self.reward {
            RewardLearner::Linear(blr) => blr.observe(&BlrPosterior::design_row(z), interaction.reward)?,
            RewardLearner::Ensemble(e) => e.observe(z, &interaction.context, interaction.reward, rng),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{build_offline_model, DrawsPerCell};
    use crate::domain::{ContextSpace, Embedding, RngStream};
    use crate::env::{build_database, oracle_table, CellGaussian, LinearReward, MeanModel, SyntheticGeneratorSpec};
    use nalgebra::DMatrix;

    fn ctx(space: &ContextSpace, i: usize) -> Context {
        space.decode(i).unwrap()
    }

    fn blr(d: usize) -> BlrPosterior {
        BlrPosterior::isotropic_prior(d, 77.0, 1e-2, 1.0, 3.0).unwrap()
    }

    /// Online agent whose cell posteriors are nearly point masses at `means`.
    fn point_mass_agent(means: &[Vec<f64>]) -> Gambitts {
        let d = means[0].len();
        let cells = means
            .iter()
            .map(|m| NiwPosterior::new(DVector::from_column_slice(m), 1e12, DMatrix::identity(d, d) * 1e-12, 1e6).unwrap())
            .collect();
        Gambitts {
            n_actions: means.len(),
            treatment: TreatmentModel::Online { cells, frozen: false },
            reward: RewardLearner::Linear(blr(d)),
            integration: Integration::ClosedForm,
            mc_samples: 100,
        }
    }

    fn offline_agent(n_actions: usize, dim: usize, pools: Vec<Vec<f64>>) -> Gambitts {
        Gambitts {
            n_actions,
            treatment: TreatmentModel::Offline(OfflineTreatmentModel::from_pools(n_actions, dim, pools)),
            reward: RewardLearner::Linear(blr(dim)),
            integration: Integration::ClosedForm,
            mc_samples: 100,
        }
    }

    fn small_db(seed: u64) -> crate::env::ResponseDatabase {
        let spec = SyntheticGeneratorSpec {
            n_contexts: 3,
            n_actions: 4,
            dim: 2,
            cells: (0..12)
                .map(|i| CellGaussian {
                    mean: vec![((i * 7) % 5) as f64 * 0.4, ((i * 3) % 4) as f64 * -0.3],
                    cov: vec![1.0, 0.3, 0.3, 0.5],
                })
                .collect(),
            samples_per_cell: 200,
        };
        build_database(&spec, &mut RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn zero_slope_ties_to_first_arm() {
        let space = ContextSpace::flat(1).unwrap();
        let agent = point_mass_agent(&[vec![0.5, 1.0], vec![3.0, 2.0], vec![-1.0, 0.0]]);
        let draw = RewardDraw::Linear(DVector::from_vec(vec![77.0, 0.0, 0.0]));
        let values = agent.arm_values(&ctx(&space, 0), &draw, &mut RngStream::new(1, 0)).unwrap();
        assert!(values.iter().all(|&v| v == 77.0));
        assert_eq!(argmax(&values), 0);
    }

    #[test]
    fn point_mass_treatments_pick_best_embedding() {
        let space = ContextSpace::flat(1).unwrap();
        let agent = point_mass_agent(&[vec![0.0], vec![2.0], vec![1.0]]);
        let draw = RewardDraw::Linear(DVector::from_vec(vec![0.0, 1.0]));
        let mut rng = RngStream::new(2, 0);
        for _ in 0..100 {
            assert_eq!(argmax(&agent.arm_values(&ctx(&space, 0), &draw, &mut rng).unwrap()), 1);
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form() {
        let space = ContextSpace::flat(1).unwrap();
        let mut agent = point_mass_agent(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let prior = NiwPosterior::default_prior(2).update(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![2.0, 0.5]]);
        agent.treatment = TreatmentModel::Online { cells: vec![prior.clone(), prior.clone()], frozen: false };
        agent.mc_samples = 100_000;
        let beta = DVector::from_vec(vec![10.0, 1.5, -0.7]);
        let draw = RewardDraw::Linear(beta.clone());
        let context = ctx(&space, 0);

        let closed = agent.arm_values(&context, &draw, &mut RngStream::new(3, 0)).unwrap()[0];
        agent.integration = Integration::MonteCarlo;
        let mc = agent.arm_values(&context, &draw, &mut RngStream::new(3, 0)).unwrap()[0];
        // Both paths see the same first-arm parameter draw.
        let theta1 = prior.sample(&mut RngStream::new(3, 0)).unwrap();
        let slope = beta.rows(1, 2).into_owned();
        let sd = (slope.transpose() * &theta1.cov * &slope)[0].sqrt();
        let se = sd / (agent.mc_samples as f64).sqrt();
        assert!((mc - closed).abs() < 4.0 * se, "mc {mc} closed {closed} se {se}");
    }

    #[test]
    fn identical_pools_tie_to_first_arm() {
        let space = ContextSpace::flat(1).unwrap();
        let pool = vec![0.3, -1.0, 2.5, 0.1];
        let agent = offline_agent(3, 2, vec![pool.clone(), pool.clone(), pool]);
        let mut rng = RngStream::new(4, 0);
        for _ in 0..50 {
            assert_eq!(agent.select(&ctx(&space, 0), &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn monotone_linear_picks_largest_pool_mean() {
        let space = ContextSpace::flat(1).unwrap();
        let agent = offline_agent(3, 1, vec![vec![-1.0, 1.0], vec![0.5, 1.5], vec![1.0, 3.0]]);
        let draw = RewardDraw::Linear(DVector::from_vec(vec![77.0, 0.25]));
        let values = agent.arm_values(&ctx(&space, 0), &draw, &mut RngStream::new(5, 0)).unwrap();
        assert_eq!(argmax(&values), 2);
    }

    #[test]
    fn pool_average_matches_exhaustive_evaluation() {
        let db = small_db(6);
        let offline = build_offline_model(&db, DrawsPerCell::FULL, &mut RngStream::new(6, 1)).unwrap();
        let agent = Gambitts {
            n_actions: 4,
            treatment: TreatmentModel::Offline(offline.clone()),
            reward: RewardLearner::Linear(blr(2)),
            integration: Integration::ClosedForm,
            mc_samples: 1,
        };
        let space = ContextSpace::flat(3).unwrap();
        let beta = vec![77.0, 0.8, -1.3];
        let draw = RewardDraw::Linear(DVector::from_vec(beta.clone()));
        for c in 0..3 {
            let values = agent.arm_values(&ctx(&space, c), &draw, &mut RngStream::new(6, 2)).unwrap();
            for (a, v) in values.iter().enumerate() {
                let n = offline.len(c, a) as f64;
                let exhaustive: f64 =
                    offline.samples(c, a).map(|z| beta[0] + beta[1] * z[0] + beta[2] * z[1]).sum::<f64>() / n;
                assert!((v - exhaustive).abs() <= 1e-12 * exhaustive.abs(), "{v} vs {exhaustive}");
            }
        }
    }

    #[test]
    fn truth_aligned_offline_agent_selects_optimal_arms() {
        let db = small_db(7);
        let truth = MeanModel::Linear(LinearReward::new(77.0, vec![1.0, 2.0]));
        let oracle = oracle_table(&db, &truth).unwrap();
        let offline = build_offline_model(&db, DrawsPerCell::FULL, &mut RngStream::new(7, 1)).unwrap();
        let agent = Gambitts {
            n_actions: 4,
            treatment: TreatmentModel::Offline(offline),
            reward: RewardLearner::Linear(blr(2)),
            integration: Integration::ClosedForm,
            mc_samples: 1,
        };
        let space = ContextSpace::flat(3).unwrap();
        let draw = RewardDraw::Linear(DVector::from_vec(vec![77.0, 1.0, 2.0]));
        for c in 0..3 {
            let values = agent.arm_values(&ctx(&space, c), &draw, &mut RngStream::new(7, 2)).unwrap();
            assert_eq!(argmax(&values), oracle.a_star(c));
        }
    }

    #[test]
    fn constant_shift_leaves_choice_unchanged() {
        let db = small_db(8);
        let offline = build_offline_model(&db, DrawsPerCell::Count(30), &mut RngStream::new(8, 1)).unwrap();
        let agent = Gambitts {
            n_actions: 4,
            treatment: TreatmentModel::Offline(offline),
            reward: RewardLearner::Linear(blr(2)),
            integration: Integration::ClosedForm,
            mc_samples: 1,
        };
        let space = ContextSpace::flat(3).unwrap();
        for c in 0..3 {
            let a = DVector::from_vec(vec![77.0, 0.4, 0.9]);
            let b = DVector::from_vec(vec![-1234.5, 0.4, 0.9]);
            let va = agent.arm_values(&ctx(&space, c), &RewardDraw::Linear(a), &mut RngStream::new(8, 2)).unwrap();
            let vb = agent.arm_values(&ctx(&space, c), &RewardDraw::Linear(b), &mut RngStream::new(8, 2)).unwrap();
            assert_eq!(argmax(&va), argmax(&vb));
        }
    }

    #[test]
    fn fo_and_po_share_reward_updates() {
        let db = small_db(9);
        let offline = build_offline_model(&db, DrawsPerCell::Count(10), &mut RngStream::new(9, 1)).unwrap();
        let mut po = offline_agent(4, 2, Vec::new());
        po.treatment = TreatmentModel::Offline(offline);
        let mut fo = point_mass_agent(&vec![vec![0.0, 0.0]; 12]);
        fo.n_actions = 4;
        let space = ContextSpace::flat(3).unwrap();
        let mut rng = RngStream::new(9, 2);
        for t in 0..40 {
            let interaction = Interaction {
                t,
                context: ctx(&space, t % 3),
                action: t % 4,
                embedding: Embedding(vec![rng.random::<f64>(), rng.random::<f64>() - 0.5]),
                reward: 70.0 + 10.0 * rng.random::<f64>(),
            };
            fo.observe(&interaction, &mut rng).unwrap();
            po.observe(&interaction, &mut rng).unwrap();
        }
        assert_eq!(fo.reward, po.reward);
        if let TreatmentModel::Online { cells, .. } = &fo.treatment {
            assert!(cells[0].kappa > 1e12);
        }
    }

    #[test]
    fn frozen_treatment_model_ignores_interactions() {
        let mut agent = point_mass_agent(&[vec![0.0], vec![1.0]]);
        if let TreatmentModel::Online { frozen, .. } = &mut agent.treatment {
            *frozen = true;
        }
        let before = agent.treatment.clone();
        let space = ContextSpace::flat(1).unwrap();
        let interaction =
            Interaction { t: 0, context: ctx(&space, 0), action: 1, embedding: Embedding(vec![5.0]), reward: 80.0 };
        agent.observe(&interaction, &mut RngStream::new(10, 0)).unwrap();
        assert_eq!(agent.treatment, before);
        assert_ne!(agent.reward, RewardLearner::Linear(blr(1)));
    }

    #[test]
    fn wrong_embedding_dimension_is_rejected() {
        let mut agent = point_mass_agent(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        let space = ContextSpace::flat(1).unwrap();
        let interaction =
            Interaction { t: 0, context: ctx(&space, 0), action: 0, embedding: Embedding(vec![5.0]), reward: 80.0 };
        assert!(matches!(agent.observe(&interaction, &mut RngStream::new(11, 0)), Err(Error::InvalidInput(_))));
    }

    fn ensemble_agent(burn_in: usize) -> (Gambitts, ContextSpace) {
        let space = ContextSpace::steps_and_location();
        let sizes = space.factors().iter().map(|f| f.levels.len()).collect();
        let cfg = EnsembleConfig { m_ens: 4, hidden_width: 8, batch_size: 10, buffer_capacity: 50, ..Default::default() };
        let learner = EnsembleLearner::new(cfg, 2, sizes, 1.0, burn_in, &mut RngStream::new(12, 0)).unwrap();
        let prior = NiwPosterior::default_prior(2);
        let agent = Gambitts {
            n_actions: 3,
            treatment: TreatmentModel::Online { cells: vec![prior; 3 * space.size()], frozen: false },
            reward: RewardLearner::Ensemble(learner),
            integration: Integration::MonteCarlo,
            mc_samples: 5,
        };
        (agent, space)
    }

    fn members(agent: &Gambitts) -> Vec<Mlp> {
        match &agent.reward {
            RewardLearner::Ensemble(e) => e.members.clone(),
            RewardLearner::Linear(_) => unreachable!(),
        }
    }

    #[test]
    fn ensemble_weights_fixed_during_burn_in() {
        let (mut agent, space) = ensemble_agent(100);
        let initial = members(&agent);
        let mut rng = RngStream::new(13, 0);
        for t in 0..100 {
            let interaction = Interaction {
                t,
                context: ctx(&space, t % space.size()),
                action: t % 3,
                embedding: Embedding(vec![rng.random(), rng.random()]),
                reward: 77.0 + rng.random::<f64>(),
            };
            agent.observe(&interaction, &mut rng).unwrap();
        }
        assert_eq!(members(&agent), initial);
        let interaction = Interaction {
            t: 100,
            context: ctx(&space, 0),
            action: 0,
            embedding: Embedding(vec![0.5, 0.5]),
            reward: 80.0,
        };
        agent.observe(&interaction, &mut rng).unwrap();
        assert_ne!(members(&agent), initial);
    }

    #[test]
    fn ensemble_features_are_embedding_then_one_hot() {
        let (agent, space) = ensemble_agent(0);
        let RewardLearner::Ensemble(e) = &agent.reward else { unreachable!() };
        let mut out = Vec::new();
        e.features(&[0.1, 0.2], &space.encode(&[2, 1]).unwrap(), &mut out);
        assert_eq!(out, vec![0.1, 0.2, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn ensemble_offline_value_is_member_pool_average() {
        let (mut agent, space) = ensemble_agent(0);
        let pools = (0..3 * space.size()).map(|i| vec![i as f64 * 0.1, 1.0, -0.5, 0.2]).collect();
        agent.treatment = TreatmentModel::Offline(OfflineTreatmentModel::from_pools(3, 2, pools));
        let context = ctx(&space, 5);
        let values = agent.arm_values(&context, &RewardDraw::Member(2), &mut RngStream::new(14, 0)).unwrap();
        let RewardLearner::Ensemble(e) = &agent.reward else { unreachable!() };
        let mut f = Vec::new();
        let mut expected = 0.0;
        for z in [[1.6, 1.0], [-0.5, 0.2]] {
            e.features(&z, &context, &mut f);
            expected += e.predict(2, &f) / 2.0;
        }
        assert!((values[1] - expected).abs() < 1e-12);
    }
}
