use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{apply_action_repeat, Environment};
use crate::math;
use crate::policy::Policy;
use crate::returns::{EpisodeEnd, TrajectoryBuffer, Transition};
use crate::{Error, Result};

/// How actions are chosen during collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    #[default]
    Sample,
    /// The distribution's mode (mean action for Gaussians).
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub steps: u64,
    /// Undiscounted sum of rewards.
    pub total_reward: f64,
    pub end: EpisodeEnd,
}

impl EpisodeSummary {
    pub fn success(&self) -> bool {
        self.end == EpisodeEnd::Success
    }
}

/// Steps one environment, carrying episodes across buffer boundaries.
///
/// Episode ids are `offset + k · stride` for the k-th episode, so several
/// collectors with distinct offsets and a shared stride never reuse an id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collector<E> {
    env: E,
    observation: Option<Vec<f64>>,
    episode: u64,
    episode_offset: u64,
    episode_stride: u64,
    step: u64,
    episode_reward: f64,
    total_steps: u64,
    finished: Vec<EpisodeSummary>,
}

impl<E: Environment> Collector<E> {
    pub fn new(env: E) -> Self {
        Collector::for_worker(env, 0, 1)
    }

    pub fn for_worker(env: E, worker: u64, workers: u64) -> Self {
        Collector {
            env,
            observation: None,
            episode: 0,
            episode_offset: worker,
            episode_stride: workers.max(1),
            step: 0,
            episode_reward: 0.0,
            total_steps: 0,
            finished: Vec::new(),
        }
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn env_mut(&mut self) -> &mut E {
        &mut self.env
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    /// Sets the training-progress counter seen by the environment.
    pub fn set_total_steps(&mut self, total_steps: u64) {
        self.total_steps = total_steps;
    }

    fn episode_id(&self) -> u64 {
        self.episode_offset + self.episode * self.episode_stride
    }

    /// Episodes completed since the last call.
    pub fn drain_finished(&mut self) -> Vec<EpisodeSummary> {
        core::mem::take(&mut self.finished)
    }

    /// Abandons the running episode; the next step starts a new one.
    pub fn abandon_episode(&mut self) {
        if self.observation.take().is_some() {
            self.episode += 1;
        }
    }

    /// Collects exactly `n` transitions under `policy`.
    ///
    /// A time-limit or success ending stores the observation after the final
    /// step, and so does the last transition when the buffer closes
    /// mid-episode, so either tail can be bootstrapped.
    pub fn rollout<R: RngCore + ?Sized>(
        &mut self,
        policy: &Policy,
        n: usize,
        gamma: f64,
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<TrajectoryBuffer> {
        let mut buffer = TrajectoryBuffer::new(n, gamma)?;
        let mut rng: &mut dyn RngCore = &mut RngAdapter(rng);
        let max_steps = self.env.spec().max_episode_steps;
        for i in 0..n {
            let obs = match self.observation.take() {
                Some(o) => o,
                None => {
                    self.env.set_progress(self.total_steps);
                    let o = self.env.reset(&mut rng);
                    self.step = 0;
                    self.episode_reward = 0.0;
                    if !math::is_finite_slice(&o) {
                        return Err(self.env_error("observation"));
                    }
                    o
                }
            };
            let (action, log_prob) = match mode {
                ActionMode::Sample => policy.sample_action(&obs, &mut rng)?,
                ActionMode::Deterministic => {
                    let a = policy.distribution(&obs)?.mode();
                    let lp = policy.log_prob_value(&obs, &a)?;
                    (a, lp)
                }
            };
            let repeat = self.env.spec().action_repeat;
            let outcome = apply_action_repeat(&mut self.env, &action, repeat, &mut rng).map_err(|e| match e {
                Error::NonFinite(what) => self.env_error(what),
                other => other,
            })?;
            self.total_steps += 1;
            self.episode_reward += outcome.reward;
            let mut end = outcome.end;
            if end.is_none() && self.step + 1 >= max_steps {
                end = Some(EpisodeEnd::TimeLimit);
            }
            let last = i + 1 == n;
            let bootstrap_observation = match end {
                Some(EpisodeEnd::Success) | Some(EpisodeEnd::TimeLimit) => Some(outcome.observation.clone()),
                None if last => Some(outcome.observation.clone()),
                _ => None,
            };
            buffer.push(Transition {
                observation: obs,
                action,
                reward: outcome.reward,
                log_prob,
                termination: end.into(),
                end,
                episode: self.episode_id(),
                step: self.step,
                bootstrap_observation,
            });
            match end {
                Some(end) => {
                    self.finished.push(EpisodeSummary {
                        episode: self.episode_id(),
                        steps: self.step + 1,
                        total_reward: self.episode_reward,
                        end,
                    });
                    self.episode += 1;
                    self.observation = None;
                }
                None => {
                    self.step += 1;
                    self.observation = Some(outcome.observation);
                }
            }
        }
        Ok(buffer)
    }

    /// Runs `episodes` whole episodes from fresh resets and summarizes them.
    pub fn evaluate<R: RngCore + ?Sized>(
        &mut self,
        policy: &Policy,
        episodes: usize,
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<Vec<EpisodeSummary>> {
        self.abandon_episode();
        self.finished.clear();
        let mut out = Vec::with_capacity(episodes);
        while out.len() < episodes {
            // the discount only shapes targets, which evaluation never builds
            self.rollout(policy, 1, 0.0, mode, rng)?;
            out.extend(self.drain_finished());
        }
        Ok(out)
    }

    fn env_error(&self, what: &'static str) -> Error {
        Error::EnvNonFinite {
            what,
            episode: self.episode_id(),
            step: self.step,
        }
    }
}

/// Lets a possibly unsized generator stand in as `&mut dyn RngCore`.
struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
