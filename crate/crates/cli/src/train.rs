//! The collect → update loop behind `pgrad train`.

use anyhow::{bail, Context};
use log::{info, warn};
use pgrad_core::algos::{actor_critic_update, ppo_update, reinforce_update, ActorCriticConfig, ScoreWeighting};
use pgrad_core::envs::ActionMode;
use pgrad_core::{Environment, TrajectoryBuffer, UpdateReport};

use crate::checkpoint::{Checkpoint, Worker};
use crate::config::{AlgorithmName, RunConfig};
use crate::dump::TransitionDump;
use crate::metrics::{MetricsRow, MetricsWriter};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub updates: u64,
    pub env_steps: u64,
    pub episodes: u64,
    pub mean_return: Option<f64>,
    pub success_rate: Option<f64>,
}

/// Splits `n` transitions over the workers, earlier workers taking the remainder.
fn shares(n: usize, workers: usize) -> Vec<usize> {
    (0..workers)
        .map(|w| n / workers + usize::from(w < n % workers))
        .collect()
}

fn collect_one(
    worker: &mut Worker,
    state_steps: u64,
    n: usize,
    cfg: &RunConfig,
    policy: &pgrad_core::Policy,
) -> pgrad_core::Result<TrajectoryBuffer> {
    worker.collector.set_total_steps(state_steps);
    if cfg.algorithm == AlgorithmName::Reinforce {
        worker.collector.abandon_episode();
    }
    worker
        .collector
        .rollout(policy, n, cfg.ppo.gamma, ActionMode::Sample, &mut worker.rng)
}

/// Gathers `n` transitions, concatenated in worker order.
fn collect(state: &mut Checkpoint, n: usize) -> anyhow::Result<TrajectoryBuffer> {
    let cfg = &state.config;
    let policy = &state.agent.policy;
    let steps = state.env_steps;
    let parts = shares(n, state.workers.len());
    let buffers: Vec<pgrad_core::Result<TrajectoryBuffer>> = if state.workers.len() == 1 {
        vec![collect_one(&mut state.workers[0], steps, n, cfg, policy)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = state
                .workers
                .iter_mut()
                .zip(&parts)
                .filter(|(_, &k)| k > 0)
                .map(|(w, &k)| scope.spawn(move || collect_one(w, steps, k, cfg, policy)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("rollout worker panicked"))
                .collect()
        })
    };
    let mut out: Option<TrajectoryBuffer> = None;
    for b in buffers {
        let b = b?;
        match out.as_mut() {
            Some(o) => o.extend(b),
            None => out = Some(b),
        }
    }
    let buffer = out.context("no transitions collected")?;
    let finished: Vec<_> = state
        .workers
        .iter_mut()
        .flat_map(|w| w.collector.drain_finished())
        .collect();
    for e in finished {
        state.record_episode(e);
    }
    state.env_steps += n as u64;
    Ok(buffer)
}

fn scaled(buffer: &TrajectoryBuffer, scale: f64) -> TrajectoryBuffer {
    let mut b = buffer.clone();
    if scale != 1.0 {
        for t in b.transitions_mut() {
            t.reward *= scale;
        }
    }
    b
}

fn update(state: &mut Checkpoint, buffer: &TrajectoryBuffer) -> pgrad_core::Result<Vec<UpdateReport>> {
    let cfg = &state.config.ppo;
    let agent = &mut state.agent;
    match state.config.algorithm {
        AlgorithmName::Ppo => ppo_update(buffer, agent, cfg),
        AlgorithmName::Reinforce => {
            let b = scaled(buffer, cfg.reward_scale);
            Ok(vec![reinforce_update(&b, &mut agent.policy, cfg.learning_rate)?])
        }
        AlgorithmName::A2c => {
            let b = scaled(buffer, cfg.reward_scale);
            let ac = ActorCriticConfig {
                targets: cfg.targets,
                policy_learning_rate: cfg.learning_rate,
                value_learning_rate: cfg.value_learning_rate,
                normalize_advantages: cfg.normalize_advantages,
                weighting: ScoreWeighting::Discounted,
            };
            Ok(vec![actor_critic_update(&b, &mut agent.policy, &mut agent.value, &ac)?])
        }
    }
}

fn metrics_row(state: &Checkpoint, reports: &[UpdateReport]) -> MetricsRow {
    let first = &reports[0];
    let last = reports.last().unwrap_or(first);
    MetricsRow {
        update: state.updates,
        env_steps: state.env_steps,
        episodes: state.episodes,
        mean_return: state.recent_mean_return(),
        success_rate: state.recent_success_rate(),
        policy_loss: last.policy_loss,
        value_loss: last.value_loss,
        entropy: last.entropy,
        clip_fraction: last.clip_fraction,
        approx_kl: last.approx_kl,
        ratio_epoch0: first.mean_ratio,
        grad_norm: last.grad_norm,
        epochs: reports.len(),
    }
}

/// Runs `config` to its step budget.
///
/// With `resume`, training continues from `config.checkpoint`, whose run
/// settings must match apart from the step budget; the metrics file is cut
/// back to the rows the checkpoint accounts for.
pub fn train(config: &RunConfig, resume: bool) -> anyhow::Result<TrainOutcome> {
    config.validate()?;
    if config.algorithm == AlgorithmName::Reinforce {
        let limit = config.env.build()?.spec().max_episode_steps as usize;
        if config.ppo.horizon / config.workers < limit {
            bail!(
                "ppo.horizon: REINFORCE needs {} transitions per worker to hold a whole episode, got {}",
                limit,
                config.ppo.horizon / config.workers
            );
        }
    }
    let (mut state, mut metrics) = if resume {
        let mut ckpt = Checkpoint::load(&config.checkpoint)?;
        if !ckpt.config.same_run_as(config) {
            bail!(
                "{} was written by a different run configuration",
                config.checkpoint.display()
            );
        }
        ckpt.config.total_steps = config.total_steps;
        let metrics = MetricsWriter::resume(&config.metrics, ckpt.updates)?;
        info!("resuming at update {} ({} steps)", ckpt.updates, ckpt.env_steps);
        (ckpt, metrics)
    } else {
        let ckpt = Checkpoint::initial(config)?;
        let metrics = MetricsWriter::create(&config.metrics)?;
        ckpt.save(&config.checkpoint)?;
        (ckpt, metrics)
    };
    let mut dump = config
        .dump_transitions
        .as_deref()
        .map(|p| TransitionDump::open(p, resume))
        .transpose()?;

    let interval = config.checkpoint_interval;
    let mut saved_at = state.updates;
    while state.env_steps < config.total_steps {
        let n = (config.total_steps - state.env_steps).min(config.ppo.horizon as u64) as usize;
        let last_good = state.clone();
        let step = collect(&mut state, n).and_then(|buffer| {
            if let Some(d) = dump.as_mut() {
                d.write_all(buffer.transitions())?;
            }
            Ok(update(&mut state, &buffer)?)
        });
        let reports = match step {
            Ok(r) => r,
            Err(e) => {
                last_good.save(&config.checkpoint)?;
                warn!("update {} failed; saved the last good state", last_good.updates + 1);
                return Err(e.context(format!(
                    "update {} failed; last good state written to {}",
                    last_good.updates + 1,
                    config.checkpoint.display()
                )));
            }
        };
        state.updates += 1;
        let row = metrics_row(&state, &reports);
        metrics.append(&row)?;
        info!(
            "update {} steps {} episodes {} return {} success {}",
            row.update,
            row.env_steps,
            row.episodes,
            row.mean_return.map_or("-".into(), |r| format!("{r:.3}")),
            row.success_rate.map_or("-".into(), |r| format!("{r:.2}")),
        );
        if interval > 0 && state.updates % interval == 0 {
            state.save(&config.checkpoint)?;
            saved_at = state.updates;
        }
    }
    if saved_at != state.updates {
        state.save(&config.checkpoint)?;
    }
    Ok(TrainOutcome {
        updates: state.updates,
        env_steps: state.env_steps,
        episodes: state.episodes,
        mean_return: state.recent_mean_return(),
        success_rate: state.recent_success_rate(),
    })
}
