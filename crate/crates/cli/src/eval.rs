//! Policy evaluation behind `pgrad eval`.

use std::path::Path;

use anyhow::bail;
use pgrad_core::envs::{ActionMode, ActionSpace, AnyEnv};
use pgrad_core::{Collector, Environment, Policy};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{stream, Checkpoint, EVAL_STREAM};

/// Return statistics are undiscounted and use the population deviation.
/// All statistics are `None` for zero episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub deterministic: bool,
    pub seed: u64,
    pub mean_return: Option<f64>,
    pub sd_return: Option<f64>,
    pub success_rate: Option<f64>,
    pub mean_length: Option<f64>,
}

/// Fails unless the policy's input and output shapes fit the environment.
pub fn check_compatible(policy: &Policy, env: &AnyEnv) -> anyhow::Result<()> {
    let spec = env.spec();
    if policy.obs_dim() != spec.obs_dim {
        bail!(
            "policy expects {}-dimensional observations but the environment emits {}",
            policy.obs_dim(),
            spec.obs_dim
        );
    }
    match (policy, &spec.actions) {
        (Policy::Categorical(c), ActionSpace::Discrete(n)) if c.n_actions() == *n => Ok(()),
        (Policy::Gaussian(g), ActionSpace::Continuous { low, .. }) if g.action_dim() == low.len() => Ok(()),
        _ => bail!("policy action head does not match the environment's action space"),
    }
}

pub fn evaluate(
    ckpt: &Checkpoint,
    episodes: usize,
    deterministic: bool,
    seed: Option<u64>,
) -> anyhow::Result<EvalSummary> {
    let env = ckpt.config.env.build()?;
    check_compatible(&ckpt.agent.policy, &env)?;
    let seed = seed.unwrap_or(ckpt.config.seed);
    let mut rng = stream(seed, EVAL_STREAM);
    let mut collector = Collector::new(env);
    // curricula read training progress from the step counter
    collector.set_total_steps(ckpt.env_steps);
    let mode = if deterministic {
        ActionMode::Deterministic
    } else {
        ActionMode::Sample
    };
    let runs = collector.evaluate(&ckpt.agent.policy, episodes, mode, &mut rng)?;
    let n = runs.len() as f64;
    let mean = |f: &dyn Fn(&pgrad_core::envs::EpisodeSummary) -> f64| {
        (!runs.is_empty()).then(|| runs.iter().map(f).sum::<f64>() / n)
    };
    let mean_return = mean(&|e| e.total_reward);
    let sd_return = mean_return.map(|m| (runs.iter().map(|e| (e.total_reward - m).powi(2)).sum::<f64>() / n).sqrt());
    Ok(EvalSummary {
        episodes: runs.len(),
        deterministic,
        seed,
        mean_return,
        sd_return,
        success_rate: mean(&|e| f64::from(u8::from(e.success()))),
        mean_length: mean(&|e| e.steps as f64),
    })
}

pub fn write_summary(summary: &EvalSummary, path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
