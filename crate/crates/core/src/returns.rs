//! Reward sequences to returns, K-step Q̂ targets, advantages and the
//! critic regression loss.
//!
//! A [`TrajectoryBuffer`] may hold several episodes. Each contiguous run of
//! transitions sharing an episode id is a *block*; a K-step window never
//! leaves its block. A block ends at a terminal transition, at the end of
//! the buffer, or where a parallel worker's segment ends. Blocks that end
//! without a truncating termination carry the observation that follows
//! them so the tail can be bootstrapped.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::policy::{Action, ValueFunction};
use crate::{Error, Result};

/// How a transition relates to the end of its episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    Running,
    /// Episode ended but the value beyond it is not zero (time limit) or is
    /// decided by [`SuccessValue`] (goal reached).
    BootstrapTerminal,
    /// Episode ended by failure; nothing beyond it is credited.
    TruncateTerminal,
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Success,
    /// Cut off by an episode-length limit; the task itself would go on.
    TimeLimit,
    Failure,
    /// The task's own finite horizon ran out; nothing follows.
    Horizon,
}

impl EpisodeEnd {
    pub fn termination(self) -> TerminationKind {
        match self {
            EpisodeEnd::Success | EpisodeEnd::TimeLimit => TerminationKind::BootstrapTerminal,
            EpisodeEnd::Failure | EpisodeEnd::Horizon => TerminationKind::TruncateTerminal,
        }
    }
}

impl From<Option<EpisodeEnd>> for TerminationKind {
    fn from(end: Option<EpisodeEnd>) -> Self {
        end.map_or(TerminationKind::Running, EpisodeEnd::termination)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    /// log π_old(a|o) recorded when the action was sampled.
    pub log_prob: f64,
    pub termination: TerminationKind,
    pub end: Option<EpisodeEnd>,
    pub episode: u64,
    /// Decision step within the episode, starting at 0.
    pub step: u64,
    /// Observation following this transition when it ends a block that may
    /// need bootstrapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_observation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBuffer {
    gamma: f64,
    horizon: usize,
    transitions: Vec<Transition>,
}

pub(crate) fn check_discount(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Discount(gamma))
    }
}

impl TrajectoryBuffer {
    pub fn new(horizon: usize, gamma: f64) -> Result<Self> {
        check_discount(gamma)?;
        if horizon == 0 {
            return Err(Error::invalid("buffer horizon must be positive"));
        }
        Ok(TrajectoryBuffer {
            gamma,
            horizon,
            transitions: Vec::with_capacity(horizon),
        })
    }

    pub fn from_transitions(gamma: f64, transitions: Vec<Transition>) -> Result<Self> {
        let mut b = TrajectoryBuffer::new(transitions.len().max(1), gamma)?;
        b.transitions = transitions;
        b.validate()?;
        Ok(b)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.transitions.len() >= self.horizon
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transitions_mut(&mut self) -> &mut [Transition] {
        &mut self.transitions
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    /// Appends another buffer (a second worker's segment).
    pub fn extend(&mut self, other: TrajectoryBuffer) {
        self.horizon = self.horizon.max(self.transitions.len() + other.transitions.len());
        self.transitions.extend(other.transitions);
    }

    /// Whether the window starting anywhere inside a block stops at `i`.
    pub fn ends_block(&self, i: usize) -> bool {
        let t = &self.transitions[i];
        t.termination != TerminationKind::Running
            || i + 1 == self.transitions.len()
            || self.transitions[i + 1].episode != t.episode
    }

    /// Indices of transitions that terminate an episode.
    pub fn termination_indices(&self) -> Vec<usize> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|(_, t)| t.termination != TerminationKind::Running)
            .map(|(i, _)| i)
            .collect()
    }

    /// Half-open index ranges of the blocks, in order.
    pub fn blocks(&self) -> Vec<core::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 0..self.transitions.len() {
            if self.ends_block(i) {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        out
    }

    /// Checks that episode ids are contiguous and terminal transitions close
    /// their episode.
    pub fn validate(&self) -> Result<()> {
        let mut closed = alloc::collections::BTreeSet::new();
        for (i, t) in self.transitions.iter().enumerate() {
            if !t.reward.is_finite() {
                return Err(Error::NonFinite("reward"));
            }
            if t.end.is_some_and(|e| e.termination() != t.termination) {
                return Err(Error::invalid("termination kind disagrees with episode end"));
            }
            if closed.contains(&t.episode) {
                return Err(Error::invalid("episode id appears in two separate blocks"));
            }
            let next_differs = self.transitions.get(i + 1).is_none_or(|n| n.episode != t.episode);
            if t.termination != TerminationKind::Running && !next_differs {
                return Err(Error::invalid("terminal transition does not end its episode"));
            }
            if next_differs {
                closed.insert(t.episode);
            }
        }
        Ok(())
    }
}

/// How far a bootstrapped target looks ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetHorizon {
    /// Sum rewards to the end of the block, then bootstrap.
    #[default]
    ToBlockEnd,
    /// K-step window.
    Fixed(usize),
}

/// Value credited after a successful (goal-reaching) termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessValue {
    /// The goal is absorbing and worth 0 afterwards.
    #[default]
    Absorbing,
    /// Bootstrap from the post-goal observation like a time limit.
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TargetConfig {
    pub horizon: TargetHorizon,
    pub success: SuccessValue,
}

/// Anything that can estimate V(o).
pub trait StateValue {
    fn state_value(&self, obs: &[f64]) -> Result<f64>;
}

impl StateValue for ValueFunction {
    fn state_value(&self, obs: &[f64]) -> Result<f64> {
        self.value(obs)
    }
}

impl<F: Fn(&[f64]) -> f64> StateValue for F {
    fn state_value(&self, obs: &[f64]) -> Result<f64> {
        Ok(self(obs))
    }
}

/// V ≡ 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroValue;

impl StateValue for ZeroValue {
    fn state_value(&self, _obs: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
}

/// V evaluated once on every observation of a buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    /// V(o_t) for each transition.
    pub observation: Vec<f64>,
    /// V of the bootstrap observation, where one is stored.
    pub bootstrap: Vec<Option<f64>>,
}

impl ValueTable {
    pub fn evaluate<V: StateValue + ?Sized>(buffer: &TrajectoryBuffer, v: &V) -> Result<Self> {
        let mut observation = Vec::with_capacity(buffer.len());
        let mut bootstrap = Vec::with_capacity(buffer.len());
        for t in buffer.transitions() {
            observation.push(v.state_value(&t.observation)?);
            bootstrap.push(match &t.bootstrap_observation {
                Some(o) => Some(v.state_value(o)?),
                None => None,
            });
        }
        Ok(ValueTable { observation, bootstrap })
    }
}

/// What closes a window.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    /// Nothing beyond the window is credited.
    Zero,
    /// V(o_i) of transition `i` (window ran its full K steps).
    Observation(usize),
    /// V of the bootstrap observation stored on transition `i`.
    Bootstrap(usize),
}

/// Σ_{i<K} γ^i r_{t+i} within the block, the discount γ^j at the tail, and
/// what the tail is worth.
fn window(buffer: &TrajectoryBuffer, t: usize, k: usize, success: SuccessValue) -> Result<(f64, f64, Tail)> {
    if t >= buffer.len() {
        return Err(Error::OutOfBuffer {
            index: t,
            len: buffer.len(),
        });
    }
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let gamma = buffer.gamma();
    let mut sum = 0.0;
    let mut disc = 1.0;
    for i in 0..k {
        let j = t + i;
        let tr = &buffer.transitions()[j];
        sum += disc * tr.reward;
        disc *= gamma;
        if buffer.ends_block(j) {
            let tail = match tr.termination {
                TerminationKind::TruncateTerminal => Tail::Zero,
                TerminationKind::BootstrapTerminal
                    if tr.end == Some(EpisodeEnd::Success) && success == SuccessValue::Absorbing =>
                {
                    Tail::Zero
                }
                _ => Tail::Bootstrap(j),
            };
            return Ok((sum, disc, tail));
        }
    }
    Ok((sum, disc, Tail::Observation(t + k)))
}

fn tail_value<V: StateValue + ?Sized>(buffer: &TrajectoryBuffer, tail: Tail, v: &V) -> Result<f64> {
    match tail {
        Tail::Zero => Ok(0.0),
        Tail::Observation(i) => v.state_value(&buffer.transitions()[i].observation),
        Tail::Bootstrap(i) => match &buffer.transitions()[i].bootstrap_observation {
            Some(o) => v.state_value(o),
            None => Err(Error::MissingBootstrapObservation(i)),
        },
    }
}

fn tail_from_table(tail: Tail, table: &ValueTable) -> Result<f64> {
    match tail {
        Tail::Zero => Ok(0.0),
        Tail::Observation(i) => Ok(table.observation[i]),
        Tail::Bootstrap(i) => table.bootstrap[i].ok_or(Error::MissingBootstrapObservation(i)),
    }
}

/// R_t = Σ_{t'≥t} γ^{t'−t} r_{t'} over the given window.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Result<Vec<f64>> {
    check_discount(gamma)?;
    if !crate::math::is_finite_slice(rewards) {
        return Err(Error::NonFinite("reward"));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut next = 0.0;
    for i in (0..rewards.len()).rev() {
        next = rewards[i] + gamma * next;
        out[i] = next;
    }
    Ok(out)
}

/// Σ_{i<K} γ^i r_{t+i}, cut short where the block ends.
pub fn k_step_truncated_q(buffer: &TrajectoryBuffer, t: usize, k: usize) -> Result<f64> {
    window(buffer, t, k, SuccessValue::Absorbing).map(|(sum, _, _)| sum)
}

/// Σ_{i<K} γ^i r_{t+i} + γ^K V(o_{t+K}), with the tail replaced according to
/// how the block ends when it ends inside the window.
pub fn k_step_bootstrap_q<V: StateValue + ?Sized>(
    buffer: &TrajectoryBuffer,
    t: usize,
    k: usize,
    v: &V,
    success: SuccessValue,
) -> Result<f64> {
    let (sum, disc, tail) = window(buffer, t, k, success)?;
    Ok(sum + disc * tail_value(buffer, tail, v)?)
}

/// Bootstrapped targets for every transition, using precomputed values.
pub fn bootstrap_targets(buffer: &TrajectoryBuffer, cfg: &TargetConfig, table: &ValueTable) -> Result<Vec<f64>> {
    let n = buffer.len();
    match cfg.horizon {
        TargetHorizon::Fixed(k) => (0..n)
            .map(|t| {
                let (sum, disc, tail) = window(buffer, t, k, cfg.success)?;
                Ok(sum + disc * tail_from_table(tail, table)?)
            })
            .collect(),
        TargetHorizon::ToBlockEnd => {
            let gamma = buffer.gamma();
            let mut out = vec![0.0; n];
            let mut next = 0.0;
            for i in (0..n).rev() {
                let tr = &buffer.transitions()[i];
                let after = if buffer.ends_block(i) {
                    let (_, _, tail) = window(buffer, i, 1, cfg.success)?;
                    tail_from_table(tail, table)?
                } else {
                    next
                };
                next = tr.reward + gamma * after;
                out[i] = next;
            }
            Ok(out)
        }
    }
}

/// Â_t = Q̂_t − V(o_t).
pub fn advantages(qhat: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    if qhat.len() != values.len() {
        return Err(Error::Length {
            what: "qhat/values",
            left: qhat.len(),
            right: values.len(),
        });
    }
    Ok(qhat.iter().zip(values).map(|(q, v)| q - v).collect())
}

/// Shifts to mean 0 and scales to unit (population) standard deviation,
/// flooring the deviation at 1e-8; constant input maps to zeros.
pub fn normalize_advantages(adv: &[f64]) -> Result<Vec<f64>> {
    if adv.len() < 2 {
        return Err(Error::invalid("normalization needs at least two advantages"));
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let sd = crate::math::sqrt(var).max(1e-8);
    Ok(adv.iter().map(|a| (a - mean) / sd).collect())
}

/// 0.5 · mean((V − V̂)²); targets are constants.
pub fn value_loss<'t>(values: &[Var<'t>], targets: &[f64]) -> Result<Var<'t>> {
    if values.is_empty() {
        return Err(Error::Empty("value loss inputs"));
    }
    if values.len() != targets.len() {
        return Err(Error::Length {
            what: "values/targets",
            left: values.len(),
            right: targets.len(),
        });
    }
    let tape: &'t Tape = values[0].tape();
    let sq: Vec<Var<'t>> = values.iter().zip(targets).map(|(&v, &y)| (v - y).square()).collect();
    Ok(tape.mean(&sq) * 0.5)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn transition(episode: u64, step: u64, reward: f64, end: Option<EpisodeEnd>) -> Transition {
        Transition {
            observation: vec![episode as f64, step as f64],
            action: Action::Discrete(0),
            reward,
            log_prob: 0.0,
            termination: end.into(),
            end,
            episode,
            step,
            bootstrap_observation: None,
        }
    }

    /// One episode per entry of `lengths`; each ends with the given kind,
    /// bootstrap observations filled in where they are needed.
    fn buffer_of(gamma: f64, rewards: &[f64], ends: &[(usize, Option<EpisodeEnd>)]) -> TrajectoryBuffer {
        let mut out = Vec::new();
        let mut at = 0;
        for (ep, &(len, end)) in ends.iter().enumerate() {
            for s in 0..len {
                let last = s + 1 == len;
                let mut t = transition(ep as u64, s as u64, rewards[at], if last { end } else { None });
                if last && end != Some(EpisodeEnd::Failure) {
                    t.bootstrap_observation = Some(vec![ep as f64, (s + 1) as f64]);
                }
                out.push(t);
                at += 1;
            }
        }
        TrajectoryBuffer::from_transitions(gamma, out).unwrap()
    }

    // V(o) = 1 + step, so every bootstrap term is easy to read off
    fn step_value(o: &[f64]) -> f64 {
        1.0 + o[1]
    }

    #[test]
    fn discounted_examples() {
        assert_eq!(discounted_returns(&[1.0, 1.0, 1.0], 0.5).unwrap(), [1.75, 1.5, 1.0]);
        assert_eq!(discounted_returns(&[3.0, -2.0, 5.0], 0.0).unwrap(), [3.0, -2.0, 5.0]);
        let r = discounted_returns(&[1.0; 50], 0.9).unwrap();
        let expected = (1.0 - 0.9f64.powi(50)) / 0.1;
        assert!((r[0] - expected).abs() < 1e-12);
        assert!((r[0] - 9.948_462_247_926_2).abs() < 1e-9);
        assert_eq!(discounted_returns(&[1.0], 1.0), Err(Error::Discount(1.0)));
        assert_eq!(discounted_returns(&[1.0], -0.1), Err(Error::Discount(-0.1)));
    }

    #[test]
    fn truncated_q_examples() {
        let b = buffer_of(0.5, &[1.0, 2.0, 3.0], &[(3, None)]);
        assert_eq!(k_step_truncated_q(&b, 0, 1).unwrap(), 1.0);
        assert_eq!(k_step_truncated_q(&b, 0, 3).unwrap(), 2.75);
        let short = buffer_of(0.5, &[1.0, 2.0, 9.0], &[(2, Some(EpisodeEnd::TimeLimit)), (1, None)]);
        assert_eq!(k_step_truncated_q(&short, 0, 5).unwrap(), 2.0);
        assert_eq!(
            k_step_truncated_q(&b, 3, 1),
            Err(Error::OutOfBuffer { index: 3, len: 3 })
        );
    }

    #[test]
    fn bootstrap_q_examples() {
        let g = 0.9;
        let b = buffer_of(g, &[1.0, 2.0, 3.0, 4.0], &[(4, None)]);
        // K = 1 is the TD target r_t + γ V(o_{t+1})
        let td = k_step_bootstrap_q(&b, 0, 1, &step_value, SuccessValue::Absorbing).unwrap();
        assert!((td - (1.0 + g * 2.0)).abs() < 1e-15);
        // zero critic reduces to truncation
        let z = k_step_bootstrap_q(&b, 1, 2, &ZeroValue, SuccessValue::Absorbing).unwrap();
        assert_eq!(z, k_step_truncated_q(&b, 1, 2).unwrap());
        // failure right after t: only r_t
        let fail = buffer_of(g, &[1.0, 5.0, 7.0], &[(2, Some(EpisodeEnd::Failure)), (1, None)]);
        let q = k_step_bootstrap_q(&fail, 1, 3, &step_value, SuccessValue::Absorbing).unwrap();
        assert_eq!(q, 5.0);
        let q0 = k_step_bootstrap_q(&fail, 0, 3, &step_value, SuccessValue::Absorbing).unwrap();
        assert_eq!(q0, 1.0 + g * 5.0);
    }

    #[test]
    fn terminal_kinds_bootstrap_differently() {
        let g = 0.5;
        let limit = buffer_of(g, &[1.0, 1.0], &[(2, Some(EpisodeEnd::TimeLimit))]);
        let q = k_step_bootstrap_q(&limit, 0, 5, &step_value, SuccessValue::Absorbing).unwrap();
        // post-terminal observation has step 2, so V = 3
        assert_eq!(q, 1.0 + 0.5 + 0.25 * 3.0);
        let goal = buffer_of(g, &[1.0, 1.0], &[(2, Some(EpisodeEnd::Success))]);
        let absorbing = k_step_bootstrap_q(&goal, 0, 5, &step_value, SuccessValue::Absorbing).unwrap();
        assert_eq!(absorbing, 1.5);
        let boot = k_step_bootstrap_q(&goal, 0, 5, &step_value, SuccessValue::Bootstrap).unwrap();
        assert_eq!(boot, q);
    }

    #[test]
    fn missing_bootstrap_observation() {
        let mut b = buffer_of(0.9, &[1.0, 1.0], &[(2, None)]);
        b.transitions_mut()[1].bootstrap_observation = None;
        assert_eq!(
            k_step_bootstrap_q(&b, 0, 4, &step_value, SuccessValue::Absorbing),
            Err(Error::MissingBootstrapObservation(1))
        );
        // truncation never needs it
        assert_eq!(k_step_truncated_q(&b, 0, 4).unwrap(), 1.9);
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(advantages(&[2.0, 0.0], &[1.0, 1.0]).unwrap(), [1.0, -1.0]);
        assert_eq!(advantages(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), [0.0, 0.0]);
        assert!(advantages(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_advantages(&[1.0, -1.0]).unwrap(), [1.0, -1.0]);
        assert_eq!(normalize_advantages(&[3.0, 3.0, 3.0]).unwrap(), [0.0, 0.0, 0.0]);
        assert!(normalize_advantages(&[1.0]).is_err());
    }

    #[test]
    fn value_loss_examples() {
        let tape = Tape::new();
        let vs = tape.vars(&[0.0, 0.0]);
        // 0.5 · mean(4, 4)
        assert_eq!(value_loss(&vs, &[2.0, -2.0]).unwrap().value(), 2.0);
        let same = tape.vars(&[1.5, -0.5]);
        assert_eq!(value_loss(&same, &[1.5, -0.5]).unwrap().value(), 0.0);
        assert_eq!(value_loss(&[], &[]).unwrap_err(), Error::Empty("value loss inputs"));
    }

    #[test]
    fn value_loss_gradient_is_residual_over_n() {
        let tape = Tape::new();
        let vs = tape.vars(&[1.0, 3.0, -2.0]);
        let loss = value_loss(&vs, &[0.0, 1.0, 1.0]).unwrap();
        tape.backward(loss).unwrap();
        let g = tape.grads(&vs);
        assert_eq!(g, [1.0 / 3.0, 2.0 / 3.0, -1.0]);
    }

    #[test]
    fn termination_mapping() {
        assert_eq!(EpisodeEnd::Success.termination(), TerminationKind::BootstrapTerminal);
        assert_eq!(EpisodeEnd::TimeLimit.termination(), TerminationKind::BootstrapTerminal);
        assert_eq!(EpisodeEnd::Failure.termination(), TerminationKind::TruncateTerminal);
    }

    #[test]
    fn validate_rejects_broken_blocks() {
        let mut ts = std::vec![
            transition(0, 0, 1.0, Some(EpisodeEnd::Failure)),
            transition(0, 1, 1.0, None),
        ];
        assert!(TrajectoryBuffer::from_transitions(0.9, ts.clone()).is_err());
        ts[1].episode = 1;
        assert!(TrajectoryBuffer::from_transitions(0.9, ts.clone()).is_ok());
        ts.push(transition(0, 5, 0.0, None));
        assert!(TrajectoryBuffer::from_transitions(0.9, ts).is_err());
    }

    fn arb_buffer() -> impl Strategy<Value = TrajectoryBuffer> {
        let end = prop_oneof![
            Just(None),
            Just(Some(EpisodeEnd::Success)),
            Just(Some(EpisodeEnd::TimeLimit)),
            Just(Some(EpisodeEnd::Failure)),
        ];
        (
            0.0f64..0.99,
            prop::collection::vec((1usize..6, end), 1..5),
            prop::collection::vec(-3.0f64..3.0, 30),
        )
            .prop_map(|(gamma, eps, rewards)| {
                let n: usize = eps.iter().map(|e| e.0).sum();
                buffer_of(gamma, &rewards[..n], &eps)
            })
    }

    proptest! {
        #[test]
        fn recursive_return_identity(rewards in prop::collection::vec(-10.0f64..10.0, 1..40), gamma in 0.0f64..0.999) {
            let r = discounted_returns(&rewards, gamma).unwrap();
            for t in 0..rewards.len() {
                let next = if t + 1 < rewards.len() { r[t + 1] } else { 0.0 };
                prop_assert_eq!(r[t], rewards[t] + gamma * next);
            }
        }

        #[test]
        fn zero_critic_bootstrap_is_truncation(b in arb_buffer(), k in 1usize..8) {
            for t in 0..b.len() {
                let boot = k_step_bootstrap_q(&b, t, k, &ZeroValue, SuccessValue::Bootstrap).unwrap();
                prop_assert_eq!(boot, k_step_truncated_q(&b, t, k).unwrap());
            }
        }

        #[test]
        fn full_window_matches_block_return(b in arb_buffer()) {
            // K = remaining block length with V ≡ 0 is the finite-horizon return
            for block in b.blocks() {
                let rewards: Vec<f64> = b.transitions()[block.clone()].iter().map(|t| t.reward).collect();
                let r = discounted_returns(&rewards, b.gamma()).unwrap();
                for (i, t) in block.clone().enumerate() {
                    let q = k_step_bootstrap_q(&b, t, block.end - t, &ZeroValue, SuccessValue::Bootstrap).unwrap();
                    prop_assert!((q - r[i]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn recursion_matches_windows(b in arb_buffer(), success_boot in any::<bool>()) {
            let success = if success_boot { SuccessValue::Bootstrap } else { SuccessValue::Absorbing };
            let table = ValueTable::evaluate(&b, &step_value).unwrap();
            let cfg = TargetConfig { horizon: TargetHorizon::ToBlockEnd, success };
            let fast = bootstrap_targets(&b, &cfg, &table).unwrap();
            for t in 0..b.len() {
                let slow = k_step_bootstrap_q(&b, t, b.len() - t, &step_value, success).unwrap();
                prop_assert!((fast[t] - slow).abs() < 1e-12);
            }
            let cfg3 = TargetConfig { horizon: TargetHorizon::Fixed(3), success };
            let fixed = bootstrap_targets(&b, &cfg3, &table).unwrap();
            for t in 0..b.len() {
                let slow = k_step_bootstrap_q(&b, t, 3, &step_value, success).unwrap();
                prop_assert_eq!(fixed[t], slow);
            }
        }

        #[test]
        fn normalization_preserves_order(xs in prop::collection::vec(-100.0f64..100.0, 2..50)) {
            let ys = normalize_advantages(&xs).unwrap();
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if xs[i] < xs[j] {
                        prop_assert!(ys[i] <= ys[j]);
                    }
                }
            }
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            prop_assert!(mean.abs() < 1e-12);
            let spread = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - xs.iter().copied().fold(f64::INFINITY, f64::min);
            if spread > 1e-6 {
                let sd = (ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n).sqrt();
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
        }
    }
}
