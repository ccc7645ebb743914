use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::config::{ExperimentConfig, GeneratorSource, RewardSpec};
use crate::domain::{Context, ContextSpace, RngStream, StreamPurpose};
use crate::ensemble::Mlp;
use crate::env::{
    build_database, misspecify_embedding, oracle_table, sigma1_of, LinearReward, MeanModel, OracleTable,
    ResponseDatabase, RewardModel, SyntheticGeneratorSpec,
};
use crate::{Error, Result};

/// Everything that stays fixed across the replications of one experiment.
#[derive(Debug, Clone)]
pub struct Environment {
    pub space: ContextSpace,
    pub db: ResponseDatabase,
    pub reward: RewardModel,
    pub oracle: OracleTable,
    /// Spread of the mean reward induced by the treatment distribution.
    pub sigma1: f64,
    contexts: Vec<Context>,
    weights: Option<WeightedIndex<f64>>,
}

impl Environment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let env = &cfg.environment;
        let space = env.context_space.clone();
        let (k, d) = (env.k, env.d);
        let mean = mean_model(&env.reward_model, d)?;

        let mut rng = RngStream::replication(cfg.seed, 0, 0, StreamPurpose::Build);
        let mut db = match &env.generator {
            GeneratorSource::Recipe(recipe) => build_database(&recipe.to_spec(&space, k, d, &mean)?, &mut rng)?,
            GeneratorSource::Cells { cells, samples_per_cell } => {
                if cells.len() != space.size() * k {
                    return Err(Error::InvalidSpec(format!(
                        "{} generator cells given but the environment has {} contexts × {k} actions",
                        cells.len(),
                        space.size()
                    )));
                }
                let spec = SyntheticGeneratorSpec {
                    n_contexts: space.size(),
                    n_actions: k,
                    dim: d,
                    cells: cells.clone(),
                    samples_per_cell: *samples_per_cell,
                };
                build_database(&spec, &mut rng)?
            }
            GeneratorSource::Database { path } => ResponseDatabase::load(path)?,
        };
        if db.n_contexts() != space.size() || db.n_actions() != k || db.dim() != d {
            return Err(Error::InvalidSpec(format!(
                "database is {} contexts × {} actions × d = {}, config expects {} × {k} × {d}",
                db.n_contexts(),
                db.n_actions(),
                db.dim(),
                space.size()
            )));
        }
        if let Some(spec) = &cfg.misspecification {
            let mut rng = RngStream::replication(cfg.seed, 0, 0, StreamPurpose::Misspecification);
            db = misspecify_embedding(&db, spec, &mut rng)?;
        }

        let sigma1 = sigma1_of(&db, &mean)?;
        let oracle = oracle_table(&db, &mean)?;
        let reward = RewardModel { mean, noise_sd: env.sigma2.unwrap_or(sigma1) };
        let weights = env
            .context_weights
            .as_ref()
            .map(|w| WeightedIndex::new(w).map_err(|e| Error::InvalidSpec(format!("context weights: {e}"))))
            .transpose()?;
        let contexts = space.contexts().collect();
        Ok(Self { space, db, reward, oracle, sigma1, contexts, weights })
    }

    pub fn n_actions(&self) -> usize {
        self.db.n_actions()
    }

    /// Dimension of the embeddings agents observe.
    pub fn visible_dim(&self) -> usize {
        self.db.visible_dim()
    }

    pub fn context(&self, index: usize) -> &Context {
        &self.contexts[index]
    }

    pub fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> &Context {
        let i = match &self.weights {
            Some(w) => w.sample(rng),
            None => rng.random_range(0..self.contexts.len()),
        };
        &self.contexts[i]
    }
}

fn mean_model(spec: &RewardSpec, d: usize) -> Result<MeanModel> {
    Ok(match spec {
        RewardSpec::Linear(m) => {
            if m.beta.len() < d {
                return Err(Error::InvalidSpec(format!("linear reward has {} slopes but d = {d}", m.beta.len())));
            }
            MeanModel::Linear(LinearReward { beta: m.beta[..d].to_vec(), ..m.clone() })
        }
        RewardSpec::Mlp(net) => {
            if net.input_dim() != d {
                return Err(Error::InvalidSpec(format!("reward network takes {} inputs but d = {d}", net.input_dim())));
            }
            MeanModel::Mlp(net.clone())
        }
        RewardSpec::RandomMlp { hidden, seed, scale, offset } => {
            if *hidden == 0 {
                return Err(Error::InvalidSpec("reward network needs at least one hidden unit".into()));
            }
            let mut net = Mlp::random(d, *hidden, &mut RngStream::new(*seed, 0));
            net.rescale_output(*scale, *offset);
            MeanModel::Mlp(net)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentConfig, AgentKind};
    use crate::env::{CellGaussian, GeneratorRecipe, MisspecSpec};
    use crate::harness::config::EnvironmentConfig;

    fn cfg(reward_model: RewardSpec, sigma2: Option<f64>) -> ExperimentConfig {
        ExperimentConfig {
            seed: 5,
            horizon: 10,
            replications: 1,
            environment: EnvironmentConfig {
                context_space: ContextSpace::steps_and_location(),
                k: 4,
                d: 2,
                generator: GeneratorSource::Recipe(GeneratorRecipe { samples_per_cell: 200, ..Default::default() }),
                reward_model,
                sigma2,
                context_weights: None,
            },
            agents: vec![AgentConfig::new("ts", AgentKind::StdTs)],
            misspecification: None,
            sweep: None,
        }
    }

    fn linear() -> RewardSpec {
        RewardSpec::Linear(LinearReward::new(77.0, vec![1.0, -0.5, 9.0]))
    }

    #[test]
    fn noise_matches_treatment_spread_by_default() {
        let env = Environment::build(&cfg(linear(), None)).unwrap();
        assert!(env.sigma1 > 0.0);
        assert_eq!(env.reward.noise_sd, env.sigma1);
        let fixed = Environment::build(&cfg(linear(), Some(0.71))).unwrap();
        assert_eq!(fixed.reward.noise_sd, 0.71);
        assert_eq!(fixed.sigma1, env.sigma1);
    }

    #[test]
    fn linear_slopes_truncated_to_d() {
        let env = Environment::build(&cfg(linear(), None)).unwrap();
        assert_eq!(env.reward.mean.input_dim(), 2);
        let mut short = cfg(RewardSpec::Linear(LinearReward::new(77.0, vec![1.0])), None);
        assert!(Environment::build(&short).is_err());
        short.environment.d = 1;
        assert!(Environment::build(&short).is_ok());
    }

    #[test]
    fn random_network_is_reproducible() {
        let spec = RewardSpec::RandomMlp { hidden: 16, seed: 9, scale: 2.0, offset: 77.0 };
        let a = Environment::build(&cfg(spec.clone(), None)).unwrap();
        let b = Environment::build(&cfg(spec, None)).unwrap();
        assert_eq!(a.reward.mean, b.reward.mean);
        assert_eq!(a.oracle, b.oracle);
    }

    #[test]
    fn explicit_cells_checked_against_shape() {
        let mut c = cfg(linear(), None);
        c.environment.generator = GeneratorSource::Cells {
            cells: vec![CellGaussian { mean: vec![0.0, 0.0], cov: vec![1.0, 0.0, 0.0, 1.0] }; 5],
            samples_per_cell: 10,
        };
        assert!(Environment::build(&c).is_err());
        c.environment.generator = GeneratorSource::Cells {
            cells: vec![CellGaussian { mean: vec![0.0, 0.0], cov: vec![1.0, 0.0, 0.0, 1.0] }; 48],
            samples_per_cell: 10,
        };
        assert_eq!(Environment::build(&c).unwrap().db.total_samples(), 480);
    }

    #[test]
    fn database_file_loaded() {
        let env = Environment::build(&cfg(linear(), None)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.csv");
        env.db.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let mut c = cfg(linear(), None);
        c.environment.generator = GeneratorSource::Database { path };
        let loaded = Environment::build(&c).unwrap();
        assert_eq!(loaded.oracle, env.oracle);
        c.environment.k = 5;
        assert!(Environment::build(&c).is_err());
    }

    #[test]
    fn misspecification_keeps_oracle() {
        let mut c = cfg(linear(), None);
        let plain = Environment::build(&c).unwrap();
        c.misspecification = Some(MisspecSpec::mixing(0.0, 1.0, 1.0));
        let mis = Environment::build(&c).unwrap();
        assert_eq!(plain.oracle, mis.oracle);
        assert_ne!(plain.db.pool(0, 0).unwrap().visible(0), mis.db.pool(0, 0).unwrap().visible(0));
    }

    #[test]
    fn weighted_contexts_follow_weights() {
        let mut c = cfg(linear(), None);
        let mut w = vec![0.0; 12];
        w[7] = 1.0;
        c.environment.context_weights = Some(w);
        let env = Environment::build(&c).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert_eq!(env.sample_context(&mut rng).index, 7);
        }
    }
}
