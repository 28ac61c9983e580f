use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvSpec, Environment, SubStep};
use crate::oracle::{one_hot, TabularMdp};
use crate::policy::Action;
use crate::returns::EpisodeEnd;
use crate::Result;

/// Samples a [`TabularMdp`] with one-hot observations.
///
/// With a finite MDP horizon the last decision ends the episode as
/// [`EpisodeEnd::Horizon`]; otherwise only the collector's time limit ends it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMdpEnv {
    mdp: TabularMdp,
    spec: EnvSpec,
    state: usize,
    time: usize,
}

fn sample_index(p: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum: take the last nonzero entry
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

impl ChainMdpEnv {
    /// `max_episode_steps` bounds episodes when the MDP has no horizon.
    pub fn new(mdp: TabularMdp, max_episode_steps: u64) -> Result<Self> {
        let limit = mdp.horizon().map_or(max_episode_steps, |h| h as u64);
        let spec = EnvSpec {
            obs_dim: mdp.n_states(),
            actions: ActionSpace::Discrete(mdp.n_actions()),
            physics_dt: 1.0,
            action_repeat: 1,
            max_episode_steps: limit.max(1),
        };
        spec.validate()?;
        Ok(ChainMdpEnv {
            mdp,
            spec,
            state: 0,
            time: 0,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn state(&self) -> usize {
        self.state
    }
}

impl Environment for ChainMdpEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.state = sample_index(self.mdp.initial(), rng);
        self.time = 0;
        self.observe()
    }

    fn physics_step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<SubStep> {
        let a = self.spec.actions.discrete_index(action)?;
        let s = self.state;
        let next = sample_index(self.mdp.next_distribution(s, a), rng);
        let reward = self.mdp.reward(s, a, next);
        self.state = next;
        self.time += 1;
        let end = (Some(self.time) == self.mdp.horizon()).then_some(EpisodeEnd::Horizon);
        Ok(SubStep { reward, end })
    }

    fn observe(&self) -> Vec<f64> {
        one_hot(self.state, self.mdp.n_states())
    }
}
