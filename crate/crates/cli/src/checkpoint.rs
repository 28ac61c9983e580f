//! Versioned JSON checkpoints holding everything a run needs to continue.

use std::collections::VecDeque;
use std::path::Path;

use anyhow::{bail, Context};
use pgrad_core::envs::{AnyEnv, EpisodeSummary};
use pgrad_core::{Agent, Collector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const FORMAT_VERSION: u32 = 1;

/// Episodes kept for the running return and success statistics.
pub const RECENT_EPISODES: usize = 100;

/// One rollout worker: its environment, episode bookkeeping and random stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub collector: Collector<AnyEnv>,
    pub rng: ChaCha8Rng,
}

/// The generator for `stream` under the root seed.
///
/// Stream 0 initializes the networks, worker `w` samples from stream `w + 1`
/// and evaluation uses the last stream.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const EVAL_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: RunConfig,
    /// θ, φ with their layouts and both optimizer states.
    pub agent: Agent,
    pub updates: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub recent: VecDeque<EpisodeSummary>,
    pub workers: Vec<Worker>,
}

impl Checkpoint {
    /// A fresh run at step 0.
    pub fn initial(config: &RunConfig) -> anyhow::Result<Self> {
        let mut init = stream(config.seed, 0);
        let probe = config.env.build()?;
        let (policy, value) = config.network.build(&probe, &mut init)?;
        let agent = Agent::new(policy, value, &config.ppo);
        let workers = (0..config.workers as u64)
            .map(|w| {
                Ok(Worker {
                    collector: Collector::for_worker(config.env.build()?, w, config.workers as u64),
                    rng: stream(config.seed, w + 1),
                })
            })
            .collect::<anyhow::Result<_>>()?;
        Ok(Checkpoint {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            agent,
            updates: 0,
            env_steps: 0,
            episodes: 0,
            recent: VecDeque::new(),
            workers,
        })
    }

    pub fn record_episode(&mut self, e: EpisodeSummary) {
        self.episodes += 1;
        if self.recent.len() == RECENT_EPISODES {
            self.recent.pop_front();
        }
        self.recent.push_back(e);
    }

    pub fn recent_mean_return(&self) -> Option<f64> {
        (!self.recent.is_empty())
            .then(|| self.recent.iter().map(|e| e.total_reward).sum::<f64>() / self.recent.len() as f64)
    }

    pub fn recent_success_rate(&self) -> Option<f64> {
        (!self.recent.is_empty())
            .then(|| self.recent.iter().filter(|e| e.success()).count() as f64 / self.recent.len() as f64)
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            format_version: u32,
        }
        let v: Version = serde_json::from_str(text).context("checkpoint has no format_version")?;
        if v.format_version != FORMAT_VERSION {
            bail!(
                "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
                v.format_version
            );
        }
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.workers.len() != ckpt.config.workers {
            bail!(
                "checkpoint holds {} workers but its config asks for {}",
                ckpt.workers.len(),
                ckpt.config.workers
            );
        }
        Ok(ckpt)
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Checkpoint::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }
}
