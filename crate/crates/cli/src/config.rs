//! Run configuration: one TOML document per run.
//!
//! ```toml
//! seed = 1
//! total_steps = 200000
//! algorithm = "ppo"
//! workers = 1
//! metrics = "runs/dense/metrics.csv"
//! checkpoint = "runs/dense/checkpoint.json"
//! checkpoint_interval = 10
//!
//! [env]
//! kind = "point_mass"
//! reward = "dense"
//!
//! [network]
//! policy_hidden = [32, 32]
//! value_hidden = [32, 32]
//! std_mode = "state_independent"
//! initial_log_std = 0.0
//!
//! [ppo]
//! clip = 0.2
//! entropy_coef = 0.01
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use pgrad_core::envs::{
    ActionSpace, AnyEnv, ChainMdpEnv, PendulumConfig, PendulumEnv, PointMassConfig, PointMassNavEnv,
};
use pgrad_core::policy::{CategoricalPolicy, GaussianPolicy, Policy, StdMode, ValueFunction};
use pgrad_core::{Environment, PpoConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp_io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    Reinforce,
    A2c,
    Ppo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// JSON file, or `builtin:two_state` / `builtin:five_state`.
    pub mdp: String,
    /// Time limit when the MDP has no horizon of its own.
    pub max_episode_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    PointMass(PointMassConfig),
    Pendulum(PendulumConfig),
    Chain(ChainConfig),
}

impl EnvConfig {
    pub fn build(&self) -> anyhow::Result<AnyEnv> {
        Ok(match self {
            EnvConfig::PointMass(c) => AnyEnv::PointMass(PointMassNavEnv::new(c.clone())?),
            EnvConfig::Pendulum(c) => AnyEnv::Pendulum(PendulumEnv::new(c.clone())?),
            EnvConfig::Chain(c) => {
                let mdp = mdp_io::load_mdp(&c.mdp)?;
                AnyEnv::Chain(ChainMdpEnv::new(mdp, c.max_episode_steps)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    /// Ignored for discrete action spaces.
    pub std_mode: StdMode,
    pub initial_log_std: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            policy_hidden: vec![64, 64],
            value_hidden: vec![64, 64],
            std_mode: StdMode::StateIndependent,
            initial_log_std: 0.0,
        }
    }
}

impl NetworkConfig {
    /// Freshly initialized policy and critic sized for `env`.
    pub fn build<R: Rng + ?Sized>(&self, env: &AnyEnv, rng: &mut R) -> anyhow::Result<(Policy, ValueFunction)> {
        let spec = env.spec();
        let policy = match &spec.actions {
            ActionSpace::Discrete(n) => {
                Policy::Categorical(CategoricalPolicy::new(spec.obs_dim, &self.policy_hidden, *n, rng)?)
            }
            ActionSpace::Continuous { low, .. } => {
                let mut g = GaussianPolicy::new(spec.obs_dim, &self.policy_hidden, low.len(), self.std_mode, rng)?;
                g.set_log_std(self.initial_log_std);
                Policy::Gaussian(g)
            }
        };
        let value = ValueFunction::new(spec.obs_dim, &self.value_hidden, rng)?;
        Ok((policy, value))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Environment steps to collect in total.
    pub total_steps: u64,
    pub algorithm: AlgorithmName,
    pub workers: usize,
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    /// Updates between checkpoints; 0 keeps only the final one.
    pub checkpoint_interval: u64,
    /// Optional JSON-lines dump of every collected transition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_transitions: Option<PathBuf>,
    pub env: EnvConfig,
    pub network: NetworkConfig,
    /// Update hyperparameters. REINFORCE reads the discount, horizon, policy
    /// learning rate and reward scale; A2C additionally reads the critic
    /// learning rate, target settings and advantage normalization.
    pub ppo: PpoConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config
            .validate()
            .with_context(|| format!("validating {}", path.display()))?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.metrics);
        join(&mut self.checkpoint);
        if let Some(p) = self.dump_transitions.as_mut() {
            join(p);
        }
        if let EnvConfig::Chain(c) = &mut self.env {
            if !c.mdp.starts_with(mdp_io::BUILTIN_PREFIX) && Path::new(&c.mdp).is_relative() {
                c.mdp = base.join(&c.mdp).to_string_lossy().into_owned();
            }
        }
    }

    /// Checks every section; errors name the offending field.
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.workers == 0 {
            bail!("workers: must be at least 1");
        }
        if self.network.policy_hidden.contains(&0) {
            bail!("network.policy_hidden: layer widths must be positive");
        }
        if self.network.value_hidden.contains(&0) {
            bail!("network.value_hidden: layer widths must be positive");
        }
        if !self.network.initial_log_std.is_finite() {
            bail!("network.initial_log_std: must be finite");
        }
        self.ppo.validate().context("ppo")?;
        if self.ppo.horizon < self.workers {
            bail!(
                "ppo.horizon: {} is smaller than the worker count {}",
                self.ppo.horizon,
                self.workers
            );
        }
        if let EnvConfig::Chain(c) = &self.env {
            if c.mdp.starts_with(mdp_io::BUILTIN_PREFIX) || Path::new(&c.mdp).exists() {
                self.env.build().context("env")?;
            }
        } else {
            self.env.build().context("env")?;
        }
        Ok(())
    }

    /// Everything except the step budget, which a resumed run may extend.
    pub fn same_run_as(&self, other: &RunConfig) -> bool {
        let mut a = self.clone();
        a.total_steps = other.total_steps;
        a == *other
    }
}
