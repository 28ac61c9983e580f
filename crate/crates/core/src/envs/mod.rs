//! Environments and the rollout collector.
//!
//! An [`Environment`] advances in physics steps; a decision step repeats
//! one action for `action_repeat` physics steps ([`apply_action_repeat`]).
//! Continuous actions arrive normalized to `[-1, 1]` and are clamped and
//! mapped to physical bounds by the environment. Episode-length limits are
//! enforced by the [`Collector`], which reports them as
//! [`EpisodeEnd::TimeLimit`].

mod chain;
mod pendulum;
mod point_mass;
mod rollout;

pub use chain::ChainMdpEnv;
pub use pendulum::{Observability, PendulumConfig, PendulumEnv};
pub use point_mass::{Curriculum, Frame, PointMassConfig, PointMassNavEnv, RewardMode};
pub use rollout::{ActionMode, Collector, EpisodeSummary};

use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::policy::Action;
use crate::returns::{EpisodeEnd, TerminationKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Discrete(usize),
    /// Physical bounds per dimension; policies act in `[-1, 1]`.
    Continuous {
        low: Vec<f64>,
        high: Vec<f64>,
    },
}

impl ActionSpace {
    /// Clamps a normalized action to `[-1, 1]` and maps it onto the bounds.
    pub fn to_physical(&self, action: &Action) -> Result<Vec<f64>> {
        match self {
            ActionSpace::Continuous { low, high } => {
                let a = action.as_continuous()?;
                if a.len() != low.len() {
                    return Err(Error::Length {
                        what: "action/bounds",
                        left: a.len(),
                        right: low.len(),
                    });
                }
                if !math::is_finite_slice(a) {
                    return Err(Error::NonFinite("action"));
                }
                Ok(a.iter()
                    .zip(low.iter().zip(high))
                    .map(|(&x, (&lo, &hi))| lo + 0.5 * (x.clamp(-1.0, 1.0) + 1.0) * (hi - lo))
                    .collect())
            }
            ActionSpace::Discrete(_) => Err(Error::ActionKind),
        }
    }

    pub fn discrete_index(&self, action: &Action) -> Result<usize> {
        match self {
            ActionSpace::Discrete(n) => {
                let a = action.as_discrete()?;
                if a >= *n {
                    return Err(Error::ActionOutOfRange { action: a, count: *n });
                }
                Ok(a)
            }
            ActionSpace::Continuous { .. } => Err(Error::ActionKind),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub actions: ActionSpace,
    /// Seconds per physics step.
    pub physics_dt: f64,
    /// Physics steps per decision step.
    pub action_repeat: usize,
    pub max_episode_steps: u64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.action_repeat == 0 || self.max_episode_steps == 0 {
            return Err(Error::invalid("action repeat and episode length must be positive"));
        }
        if !(self.physics_dt > 0.0 && self.physics_dt.is_finite()) {
            return Err(Error::invalid("physics timestep must be positive"));
        }
        if let ActionSpace::Continuous { low, high } = &self.actions {
            if low.len() != high.len() || low.iter().zip(high).any(|(l, h)| !(l < h)) {
                return Err(Error::invalid("action bounds need low < high per dimension"));
            }
        }
        Ok(())
    }

    /// Seconds per decision step.
    pub fn decision_dt(&self) -> f64 {
        self.physics_dt * self.action_repeat as f64
    }

    pub fn action_dim(&self) -> usize {
        match &self.actions {
            ActionSpace::Discrete(_) => 1,
            ActionSpace::Continuous { low, .. } => low.len(),
        }
    }
}

/// Result of one physics step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubStep {
    pub reward: f64,
    pub end: Option<EpisodeEnd>,
}

/// Result of one decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub end: Option<EpisodeEnd>,
}

impl StepOutcome {
    pub fn termination(&self) -> TerminationKind {
        self.end.into()
    }
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    /// Samples an initial state and returns its observation.
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    /// Advances one physics step under a normalized action.
    fn physics_step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<SubStep>;

    fn observe(&self) -> Vec<f64>;

    /// Environment steps taken so far in training, for schedules.
    fn set_progress(&mut self, _total_steps: u64) {}

    /// One decision step.
    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<StepOutcome>
    where
        Self: Sized,
    {
        let repeat = self.spec().action_repeat;
        apply_action_repeat(self, action, repeat, rng)
    }
}

/// Applies `action` for `repeat` physics steps, summing rewards and stopping
/// at the first sub-step that ends the episode.
pub fn apply_action_repeat<E: Environment + ?Sized>(
    env: &mut E,
    action: &Action,
    repeat: usize,
    rng: &mut dyn RngCore,
) -> Result<StepOutcome> {
    if repeat == 0 {
        return Err(Error::invalid("action repeat must be at least 1"));
    }
    let mut reward = 0.0;
    let mut end = None;
    for _ in 0..repeat {
        let sub = env.physics_step(action, rng)?;
        if !sub.reward.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        reward += sub.reward;
        if sub.end.is_some() {
            end = sub.end;
            break;
        }
    }
    let observation = env.observe();
    if !math::is_finite_slice(&observation) {
        return Err(Error::NonFinite("observation"));
    }
    Ok(StepOutcome {
        observation,
        reward,
        end,
    })
}

/// exp(−k‖goal − x‖²)
pub fn dense_goal_reward(x: &[f64], goal: &[f64], steepness: f64) -> f64 {
    math::exp(-steepness * dist_sq(x, goal))
}

/// 1 if ‖goal − x‖ < radius (strictly), else 0.
pub fn sparse_goal_reward(x: &[f64], goal: &[f64], radius: f64) -> f64 {
    if dist_sq(x, goal) < radius * radius {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Planar position and heading (radians, counter-clockwise from +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: f64,
}

/// Goal coordinates in the body frame: R(−heading)(goal − position).
pub fn egocentric_transform(goal: [f64; 2], pose: Pose) -> [f64; 2] {
    let dx = goal[0] - pose.position[0];
    let dy = goal[1] - pose.position[1];
    let (s, c) = (math::sin(pose.heading), math::cos(pose.heading));
    [c * dx + s * dy, -s * dx + c * dy]
}

/// The shipped environments behind one serializable type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnyEnv {
    PointMass(PointMassNavEnv),
    Pendulum(PendulumEnv),
    Chain(ChainMdpEnv),
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            AnyEnv::PointMass($e) => $body,
            AnyEnv::Pendulum($e) => $body,
            AnyEnv::Chain($e) => $body,
        }
    };
}

impl Environment for AnyEnv {
    fn spec(&self) -> &EnvSpec {
        dispatch!(self, e => e.spec())
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        dispatch!(self, e => e.reset(rng))
    }

    fn physics_step(&mut self, action: &Action, rng: &mut dyn RngCore) -> Result<SubStep> {
        dispatch!(self, e => e.physics_step(action, rng))
    }

    fn observe(&self) -> Vec<f64> {
        dispatch!(self, e => e.observe())
    }

    fn set_progress(&mut self, total_steps: u64) {
        dispatch!(self, e => e.set_progress(total_steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dense_reward_values() {
        assert_eq!(dense_goal_reward(&[0.3, -0.2], &[0.3, -0.2], 2.0), 1.0);
        let r = dense_goal_reward(&[1.0, 0.0], &[0.0, 0.0], 1.0);
        assert!((r - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn sparse_reward_boundary_is_strict() {
        let goal = [0.0, 0.0];
        assert_eq!(sparse_goal_reward(&goal, &goal, 0.1), 1.0);
        assert_eq!(sparse_goal_reward(&[1.0, 0.0], &goal, 0.1), 0.0);
        assert_eq!(sparse_goal_reward(&[0.25, 0.0], &goal, 0.25), 0.0);
        assert_eq!(sparse_goal_reward(&[0.2499, 0.0], &goal, 0.25), 1.0);
    }

    proptest! {
        #[test]
        fn dense_reward_decreases_with_distance(d1 in 0.0f64..5.0, d2 in 0.0f64..5.0, k in 0.1f64..4.0) {
            prop_assume!((d1 - d2).abs() > 1e-6);
            let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let a = dense_goal_reward(&[near, 0.0], &[0.0, 0.0], k);
            let b = dense_goal_reward(&[0.0, far], &[0.0, 0.0], k);
            prop_assert!(a > b || b == 0.0);
            prop_assert!(a <= 1.0 && b >= 0.0);
        }

        #[test]
        fn egocentric_frame_is_rigid_invariant(
            gx in -5.0f64..5.0, gy in -5.0f64..5.0,
            px in -5.0f64..5.0, py in -5.0f64..5.0, h in -3.2f64..3.2,
            angle in -3.2f64..3.2, tx in -5.0f64..5.0, ty in -5.0f64..5.0,
        ) {
            let pose = Pose { position: [px, py], heading: h };
            let base = egocentric_transform([gx, gy], pose);
            let (s, c) = (math::sin(angle), math::cos(angle));
            let mv = |x: f64, y: f64| [c * x - s * y + tx, s * x + c * y + ty];
            let moved = egocentric_transform(
                mv(gx, gy),
                Pose { position: mv(px, py), heading: h + angle },
            );
            prop_assert!((base[0] - moved[0]).abs() < 1e-12);
            prop_assert!((base[1] - moved[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn egocentric_examples() {
        let pose = Pose {
            position: [1.0, 2.0],
            heading: 0.7,
        };
        assert_eq!(egocentric_transform([1.0, 2.0], pose), [0.0, 0.0]);
        let origin = Pose {
            position: [0.0, 0.0],
            heading: 0.0,
        };
        assert_eq!(egocentric_transform([1.0, 0.0], origin), [1.0, 0.0]);
        let facing_up = Pose {
            position: [0.0, 0.0],
            heading: core::f64::consts::FRAC_PI_2,
        };
        let v = egocentric_transform([0.0, 1.0], facing_up);
        assert!((v[0] - 1.0).abs() < 1e-15 && v[1].abs() < 1e-15);
    }

    #[test]
    fn action_mapping_clamps() {
        let space = ActionSpace::Continuous {
            low: alloc::vec![-2.0, 0.0],
            high: alloc::vec![2.0, 10.0],
        };
        let a = Action::Continuous(alloc::vec![0.5, 3.0]);
        assert_eq!(space.to_physical(&a).unwrap(), [1.0, 10.0]);
        assert_eq!(space.to_physical(&Action::Discrete(0)), Err(Error::ActionKind));
        assert_eq!(
            ActionSpace::Discrete(2).discrete_index(&Action::Discrete(2)),
            Err(Error::ActionOutOfRange { action: 2, count: 2 })
        );
    }
}
