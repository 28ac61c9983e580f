use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    dense_goal_reward, dist_sq, egocentric_transform, sparse_goal_reward, ActionSpace, EnvSpec, Environment, Pose,
    SubStep,
};
use crate::math;
use crate::policy::Action;
use crate::returns::EpisodeEnd;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// exp(−k‖goal − x‖²) every physics step.
    Dense,
    /// 1 on goal entry, 0 otherwise.
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// (x, y, vx, vy, goal_x, goal_y)
    World,
    /// (goal − x in the body frame, velocity in the body frame)
    Egocentric,
}

/// Start distance from the goal that grows linearly from `initial_radius`
/// to the whole arena over `steps` environment steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Curriculum {
    pub initial_radius: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointMassConfig {
    pub physics_dt: f64,
    pub action_repeat: usize,
    pub max_episode_steps: u64,
    /// The arena is `[-half_size, half_size]²`.
    pub arena_half_size: f64,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    /// Acceleration bound per axis (m/s²).
    pub max_accel: f64,
    pub reward: RewardMode,
    pub steepness: f64,
    pub frame: Frame,
    pub curriculum: Option<Curriculum>,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        PointMassConfig {
            physics_dt: 0.01,
            action_repeat: 5,
            max_episode_steps: 200,
            arena_half_size: 2.0,
            goal: [1.0, 0.5],
            goal_radius: 0.2,
            max_accel: 2.0,
            reward: RewardMode::Dense,
            steepness: 1.0,
            frame: Frame::Egocentric,
            curriculum: None,
        }
    }
}

impl PointMassConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.physics_dt,
            self.arena_half_size,
            self.goal_radius,
            self.max_accel,
            self.steepness,
        ];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("point-mass scales must be positive and finite"));
        }
        if self.action_repeat == 0 || self.max_episode_steps == 0 {
            return Err(Error::invalid("action repeat and episode length must be positive"));
        }
        if self.goal.iter().any(|g| !(g.abs() < self.arena_half_size)) {
            return Err(Error::invalid("goal must lie inside the arena"));
        }
        if let Some(c) = self.curriculum {
            if !(c.initial_radius > 0.0) {
                return Err(Error::invalid("curriculum radius must be positive"));
            }
        }
        Ok(())
    }
}

/// A unit point mass in a square arena driven by a bounded 2-D acceleration.
///
/// Physics is explicit Euler: x ← x + Δt·v, then v ← v + Δt·a. Entering the
/// goal disc ends the episode as a success; leaving the arena ends it as a
/// failure with reward 0 on that step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMassNavEnv {
    config: PointMassConfig,
    spec: EnvSpec,
    position: [f64; 2],
    velocity: [f64; 2],
    progress: u64,
}

impl PointMassNavEnv {
    pub fn new(config: PointMassConfig) -> Result<Self> {
        config.validate()?;
        let spec = EnvSpec {
            obs_dim: match config.frame {
                Frame::World => 6,
                Frame::Egocentric => 4,
            },
            actions: ActionSpace::Continuous {
                low: vec![-config.max_accel; 2],
                high: vec![config.max_accel; 2],
            },
            physics_dt: config.physics_dt,
            action_repeat: config.action_repeat,
            max_episode_steps: config.max_episode_steps,
        };
        Ok(PointMassNavEnv {
            config,
            spec,
            position: [0.0; 2],
            velocity: [0.0; 2],
            progress: 0,
        })
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.config
    }

    pub fn position(&self) -> [f64; 2] {
        self.position
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.velocity
    }

    pub fn set_state(&mut self, position: [f64; 2], velocity: [f64; 2]) {
        self.position = position;
        self.velocity = velocity;
    }

    /// Largest start distance from the goal at the current progress.
    pub fn start_radius(&self) -> Option<f64> {
        let c = self.config.curriculum?;
        let h = self.config.arena_half_size;
        let full = math::sqrt(2.0) * 2.0 * h;
        let frac = if c.steps == 0 {
            1.0
        } else {
            (self.progress as f64 / c.steps as f64).min(1.0)
        };
        let r = c.initial_radius + frac * (full - c.initial_radius);
        (r < full).then_some(r)
    }

    fn in_goal(&self) -> bool {
        dist_sq(&self.position, &self.config.goal) < self.config.goal_radius * self.config.goal_radius
    }

    fn sample_start(&self, rng: &mut dyn RngCore) -> [f64; 2] {
        let h = self.config.arena_half_size;
        let g = self.config.goal;
        let r = self.start_radius();
        let (lo, hi) = match r {
            Some(r) => (
                [(g[0] - r).max(-h), (g[1] - r).max(-h)],
                [(g[0] + r).min(h), (g[1] + r).min(h)],
            ),
            None => ([-h, -h], [h, h]),
        };
        loop {
            let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
            let near_enough = r.is_none_or(|r| dist_sq(&p, &g) <= r * r);
            let outside_goal = dist_sq(&p, &g) >= self.config.goal_radius * self.config.goal_radius;
            if near_enough && outside_goal {
                return p;
            }
        }
    }
}

impl Environment for PointMassNavEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.position = self.sample_start(rng);
        self.velocity = [0.0; 2];
        self.observe()
    }

    fn physics_step(&mut self, action: &Action, _rng: &mut dyn RngCore) -> Result<SubStep> {
        let accel = self.spec.actions.to_physical(action)?;
        let dt = self.config.physics_dt;
        for i in 0..2 {
            self.position[i] += dt * self.velocity[i];
            self.velocity[i] += dt * accel[i];
        }
        let h = self.config.arena_half_size;
        if self.position.iter().any(|x| x.abs() > h) {
            return Ok(SubStep {
                reward: 0.0,
                end: Some(EpisodeEnd::Failure),
            });
        }
        let reward = match self.config.reward {
            RewardMode::Dense => dense_goal_reward(&self.position, &self.config.goal, self.config.steepness),
            RewardMode::Sparse => sparse_goal_reward(&self.position, &self.config.goal, self.config.goal_radius),
        };
        let end = self.in_goal().then_some(EpisodeEnd::Success);
        Ok(SubStep { reward, end })
    }

    fn observe(&self) -> Vec<f64> {
        let [x, y] = self.position;
        let [vx, vy] = self.velocity;
        match self.config.frame {
            Frame::World => vec![x, y, vx, vy, self.config.goal[0], self.config.goal[1]],
            Frame::Egocentric => {
                // the body frame is axis-aligned: the point mass has no orientation
                let pose = Pose {
                    position: self.position,
                    heading: 0.0,
                };
                let g = egocentric_transform(self.config.goal, pose);
                vec![g[0], g[1], vx, vy]
            }
        }
    }

    fn set_progress(&mut self, total_steps: u64) {
        self.progress = total_steps;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::apply_action_repeat;
    use crate::returns::TerminationKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env(config: PointMassConfig) -> PointMassNavEnv {
        PointMassNavEnv::new(config).unwrap()
    }

    #[test]
    fn repeat_matches_hand_iterated_euler() {
        let mut e = env(PointMassConfig {
            goal: [1.9, 1.9],
            goal_radius: 0.01,
            ..PointMassConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        e.set_state([0.1, -0.3], [0.5, 0.2]);
        let a = Action::Continuous(vec![0.5, -0.25]);
        apply_action_repeat(&mut e, &a, 4, &mut rng).unwrap();
        let (mut x, mut v) = ([0.1, -0.3], [0.5, 0.2]);
        let acc = [1.0, -0.5];
        for _ in 0..4 {
            for i in 0..2 {
                x[i] += 0.01 * v[i];
                v[i] += 0.01 * acc[i];
            }
        }
        assert_eq!(e.position(), x);
        assert_eq!(e.velocity(), v);
    }

    #[test]
    fn repeat_one_is_a_single_step() {
        let mut a = env(PointMassConfig::default());
        let mut b = a.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        a.reset(&mut rng);
        b.clone_from(&a);
        let act = Action::Continuous(vec![0.3, 0.9]);
        let out = apply_action_repeat(&mut a, &act, 1, &mut rng).unwrap();
        let sub = b.physics_step(&act, &mut rng).unwrap();
        assert_eq!(out.reward, sub.reward);
        assert_eq!(out.observation, b.observe());
    }

    #[test]
    fn goal_entry_mid_repeat_stops_early() {
        let mut e = env(PointMassConfig {
            goal: [0.0, 0.0],
            goal_radius: 0.1,
            reward: RewardMode::Sparse,
            ..PointMassConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // 0.05 m per physics step: outside after sub-step 1, inside after sub-step 2
        e.set_state([-0.16, 0.0], [5.0, 0.0]);
        let out = apply_action_repeat(&mut e, &Action::Continuous(vec![0.0, 0.0]), 4, &mut rng).unwrap();
        assert_eq!(out.end, Some(EpisodeEnd::Success));
        assert_eq!(out.termination(), TerminationKind::BootstrapTerminal);
        assert_eq!(out.reward, 1.0);
        assert!((e.position()[0] + 0.06).abs() < 1e-12);
    }

    #[test]
    fn leaving_arena_fails_with_zero_reward() {
        let mut e = env(PointMassConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        e.set_state([1.99, 0.0], [5.0, 0.0]);
        let out = apply_action_repeat(&mut e, &Action::Continuous(vec![1.0, 0.0]), 5, &mut rng).unwrap();
        assert_eq!(out.end, Some(EpisodeEnd::Failure));
        assert_eq!(out.termination(), TerminationKind::TruncateTerminal);
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn dense_reward_in_unit_interval() {
        let mut e = env(PointMassConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        e.reset(&mut rng);
        for _ in 0..50 {
            let out = apply_action_repeat(&mut e, &Action::Continuous(vec![0.1, -0.1]), 5, &mut rng).unwrap();
            assert!(out.reward > 0.0 && out.reward <= 5.0);
            if out.end.is_some() {
                break;
            }
        }
    }

    #[test]
    fn egocentric_observation_is_goal_offset() {
        let mut e = env(PointMassConfig::default());
        e.set_state([0.25, -0.5], [0.1, 0.2]);
        assert_eq!(e.observe(), [0.75, 1.0, 0.1, 0.2]);
        let w = env(PointMassConfig {
            frame: Frame::World,
            ..PointMassConfig::default()
        });
        assert_eq!(w.spec().obs_dim, 6);
    }

    #[test]
    fn resets_start_outside_goal_at_rest() {
        let mut e = env(PointMassConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            e.reset(&mut rng);
            assert_eq!(e.velocity(), [0.0, 0.0]);
            assert!(!e.in_goal());
            assert!(e.position().iter().all(|x| x.abs() <= 2.0));
        }
    }

    #[test]
    fn curriculum_widens_linearly() {
        let mut e = env(PointMassConfig {
            curriculum: Some(Curriculum {
                initial_radius: 0.5,
                steps: 1000,
            }),
            ..PointMassConfig::default()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert_eq!(e.start_radius(), Some(0.5));
        for _ in 0..100 {
            e.reset(&mut rng);
            assert!(dist_sq(&e.position(), &[1.0, 0.5]) <= 0.25);
        }
        e.set_progress(500);
        let mid = e.start_radius().unwrap();
        assert!(mid > 0.5 && mid < 4.0 * core::f64::consts::SQRT_2);
        e.set_progress(1000);
        assert_eq!(e.start_radius(), None);
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let run = || {
            let mut e = env(PointMassConfig::default());
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let mut out = e.reset(&mut rng);
            for i in 0..30 {
                let a = Action::Continuous(vec![(i as f64 * 0.1).sin(), 0.3]);
                let s = apply_action_repeat(&mut e, &a, 5, &mut rng).unwrap();
                out.extend(s.observation);
                out.push(s.reward);
            }
            out
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn rejects_goal_outside_arena() {
        assert!(PointMassNavEnv::new(PointMassConfig {
            goal: [3.0, 0.0],
            ..PointMassConfig::default()
        })
        .is_err());
    }
}
