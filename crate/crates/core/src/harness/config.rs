use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, DrawsPerCell, OfflineSpec, PretrainSpec};
use crate::domain::ContextSpace;
use crate::ensemble::Mlp;
use crate::env::{CellGaussian, GeneratorRecipe, LinearReward, MisspecSpec};
use crate::{Error, Result};

/// Where the response database comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSource {
    Recipe(GeneratorRecipe),
    /// Explicit Gaussian parameters, indexed `context * K + action`.
    Cells { cells: Vec<CellGaussian>, samples_per_cell: usize },
    /// A database file; relative paths resolve against the config file.
    Database { path: PathBuf },
}

/// Data-generating mean reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    /// `beta` may be longer than `d`; only its first `d` entries are used.
    Linear(LinearReward),
    Mlp(Mlp),
    /// A fixed ReLU network with uniform random weights, output
    /// `offset + scale · net(z)`.
    RandomMlp { hidden: usize, seed: u64, scale: f64, offset: f64 },
}

fn default_space() -> ContextSpace {
    ContextSpace::steps_and_location()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default = "default_space")]
    pub context_space: ContextSpace,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub generator: GeneratorSource,
    pub reward_model: RewardSpec,
    /// Reward noise sd; `None` sets it equal to the treatment-induced
    /// reward spread of the built database.
    #[serde(default)]
    pub sigma2: Option<f64>,
    /// Context sampling weights; uniform when absent.
    #[serde(default)]
    pub context_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    K,
    #[serde(rename = "d")]
    D,
    #[serde(rename = "sigma2")]
    Sigma2,
    #[serde(rename = "draws_per_cell")]
    DrawsPerCell,
    /// Mixing weight of the misspecified embedding; requires a
    /// `misspecification` block.
    #[serde(rename = "misspec_weight")]
    MisspecWeight,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::K => "K",
            SweepAxis::D => "d",
            SweepAxis::Sigma2 => "sigma2",
            SweepAxis::DrawsPerCell => "draws_per_cell",
            SweepAxis::MisspecWeight => "misspec_weight",
        }
    }

    /// Grid used when a config names no values for this axis.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::K => vec![3.0, 5.0, 15.0, 30.0, 40.0],
            SweepAxis::D => vec![3.0, 5.0, 10.0, 15.0, 20.0],
            SweepAxis::Sigma2 => vec![0.71, 6.68, 12.64, 18.61, 24.57],
            SweepAxis::DrawsPerCell => vec![1.0, 5.0, 10.0, 50.0, 100.0, 1000.0],
            SweepAxis::MisspecWeight => vec![1.0, 0.6, 0.2, 0.0],
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "K" | "k" => Ok(SweepAxis::K),
            "d" => Ok(SweepAxis::D),
            "sigma2" => Ok(SweepAxis::Sigma2),
            "draws_per_cell" => Ok(SweepAxis::DrawsPerCell),
            "misspec_weight" => Ok(SweepAxis::MisspecWeight),
            _ => Err(Error::InvalidInput(format!(
                "unknown sweep axis '{s}' (expected K, d, sigma2, draws_per_cell or misspec_weight)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// A full experiment: environment, agent roster, horizon and replication
/// count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub replications: usize,
    pub environment: EnvironmentConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub misspecification: Option<MisspecSpec>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a config file, resolving a relative database path against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let GeneratorSource::Database { path: db } = &mut cfg.environment.generator {
            if db.is_relative() {
                if let Some(dir) = path.parent() {
                    *db = dir.join(&*db);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("T must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidSpec("replications must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::InvalidSpec("no agents configured".into()));
        }
        let env = &self.environment;
        if env.k < 2 {
            return Err(Error::InvalidSpec(format!("K = {} but at least two actions are required", env.k)));
        }
        if env.d == 0 {
            return Err(Error::InvalidSpec("d must be at least 1".into()));
        }
        if let Some(s) = env.sigma2 {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidSpec(format!("sigma2 = {s} must be finite and nonnegative")));
            }
        }
        if let Some(w) = &env.context_weights {
            if w.len() != env.context_space.size() || w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidSpec(
                    "context_weights needs one nonnegative weight per context and a positive total".into(),
                ));
            }
        }
        let mut labels = HashSet::new();
        for agent in &self.agents {
            if !labels.insert(agent.label.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate agent label '{}'", agent.label)));
            }
            if agent.label.contains([',', '"', '\n']) {
                return Err(Error::InvalidSpec(format!("agent label '{}' must not contain commas or quotes", agent.label)));
            }
            agent.validate()?;
        }
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                self.with_sweep_value(sweep.axis, v)?;
            }
        }
        Ok(())
    }

    /// Copy of this config with one sweep axis set to `value`.
    pub fn with_sweep_value(&self, axis: SweepAxis, value: f64) -> Result<Self> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidSpec(format!("{axis} = {value} must be a positive integer")))
            }
        };
        let mut cfg = self.clone();
        cfg.sweep = None;
        match axis {
            SweepAxis::K => cfg.environment.k = count()?,
            SweepAxis::D => cfg.environment.d = count()?,
            SweepAxis::Sigma2 => {
                if !(value >= 0.0) {
                    return Err(Error::InvalidSpec(format!("sigma2 = {value} must be nonnegative")));
                }
                cfg.environment.sigma2 = Some(value)
            }
            SweepAxis::DrawsPerCell => {
                let draws = DrawsPerCell::Count(count()?);
                for agent in &mut cfg.agents {
                    if let Some(o) = agent.offline.as_mut() {
                        *o = OfflineSpec { draws_per_cell: draws };
                    }
                    if let Some(p) = agent.pretrain.as_mut() {
                        *p = PretrainSpec { draws_per_cell: draws, ..*p };
                    }
                }
            }
            SweepAxis::MisspecWeight => {
                let Some(m) = cfg.misspecification.as_mut() else {
                    return Err(Error::InvalidSpec("misspec_weight sweep needs a misspecification block".into()));
                };
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidSpec(format!("misspec_weight = {value} must lie in [0, 1]")));
                }
                m.weight = value;
            }
        }
        Ok(cfg)
    }

    pub fn agent_index(&self, label: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.label == label)
    }
}
