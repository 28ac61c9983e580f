//! Exact computation on small tabular MDPs.
//!
//! Two modes: with `horizon = None` values solve the discounted Bellman
//! system by dense LU; with `horizon = Some(T)` they come from backward
//! induction over `T` decisions. Identities that involve whole trajectories
//! are checked by exhaustive enumeration in the finite-horizon mode only.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::policy::{softmax, Action, CategoricalPolicy, Policy};
use crate::returns::check_discount;
use crate::{Error, Result};

/// Largest state count accepted by the linear solver.
pub const MAX_STATES: usize = 200;
/// Largest number of trajectory terms an enumeration may visit.
pub const ENUMERATION_CAP: u128 = 10_000_000;

const ROW_TOLERANCE: f64 = 1e-12;

/// Finite MDP with explicit transition and reward tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpFile", into = "MdpFile")]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    /// `[s][a][s']`
    transitions: Vec<f64>,
    /// `[s][a][s']`
    rewards: Vec<f64>,
    gamma: f64,
    initial: Vec<f64>,
    horizon: Option<usize>,
}

/// Rewards given per state-action pair or per transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RewardTable {
    StateAction(Vec<Vec<f64>>),
    Transition(Vec<Vec<Vec<f64>>>),
}

/// On-disk layout: nested arrays indexed `[s][a][s']`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: RewardTable,
    pub gamma: f64,
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl TryFrom<MdpFile> for TabularMdp {
    type Error = Error;

    fn try_from(f: MdpFile) -> Result<Self> {
        let n_states = f.transitions.len();
        let n_actions = f.transitions.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Empty("transition table"));
        }
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for row in &f.transitions {
            if row.len() != n_actions {
                return Err(Error::Length {
                    what: "actions per state",
                    left: row.len(),
                    right: n_actions,
                });
            }
            for dist in row {
                if dist.len() != n_states {
                    return Err(Error::Length {
                        what: "next-state distribution",
                        left: dist.len(),
                        right: n_states,
                    });
                }
                transitions.extend_from_slice(dist);
            }
        }
        let rewards = match f.rewards {
            RewardTable::StateAction(r) => {
                let mut out = Vec::with_capacity(transitions.len());
                if r.len() != n_states {
                    return Err(Error::Length {
                        what: "reward rows",
                        left: r.len(),
                        right: n_states,
                    });
                }
                for row in &r {
                    if row.len() != n_actions {
                        return Err(Error::Length {
                            what: "reward columns",
                            left: row.len(),
                            right: n_actions,
                        });
                    }
                    for &x in row {
                        out.extend(core::iter::repeat_n(x, n_states));
                    }
                }
                out
            }
            RewardTable::Transition(r) => {
                let flat: Vec<f64> = r.iter().flatten().flatten().copied().collect();
                if r.len() != n_states || flat.len() != transitions.len() {
                    return Err(Error::Length {
                        what: "reward tensor",
                        left: flat.len(),
                        right: transitions.len(),
                    });
                }
                flat
            }
        };
        TabularMdp::new(n_states, n_actions, transitions, rewards, f.gamma, f.initial, f.horizon)
    }
}

impl From<TabularMdp> for MdpFile {
    fn from(m: TabularMdp) -> Self {
        let (s, a) = (m.n_states, m.n_actions);
        let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
            (0..s)
                .map(|i| {
                    (0..a)
                        .map(|j| flat[(i * a + j) * s..(i * a + j + 1) * s].to_vec())
                        .collect()
                })
                .collect()
        };
        MdpFile {
            transitions: nest(&m.transitions),
            rewards: RewardTable::Transition(nest(&m.rewards)),
            gamma: m.gamma,
            initial: m.initial,
            horizon: m.horizon,
        }
    }
}

fn check_distribution(p: &[f64], what: &'static str) -> Result<()> {
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid(alloc::format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::invalid(alloc::format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        initial: Vec<f64>,
        horizon: Option<usize>,
    ) -> Result<Self> {
        check_discount(gamma)?;
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Empty("state or action set"));
        }
        if n_states > MAX_STATES {
            return Err(Error::invalid(alloc::format!(
                "{n_states} states exceeds the limit of {MAX_STATES}"
            )));
        }
        let len = n_states * n_actions * n_states;
        if transitions.len() != len || rewards.len() != len {
            return Err(Error::Length {
                what: "transition/reward tensors",
                left: transitions.len(),
                right: rewards.len(),
            });
        }
        if initial.len() != n_states {
            return Err(Error::Length {
                what: "initial distribution",
                left: initial.len(),
                right: n_states,
            });
        }
        if horizon == Some(0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        for row in transitions.chunks(n_states) {
            check_distribution(row, "transition row")?;
        }
        check_distribution(&initial, "initial distribution")?;
        if !crate::math::is_finite_slice(&rewards) {
            return Err(Error::NonFinite("reward table"));
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            transitions,
            rewards,
            gamma,
            initial,
            horizon,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: Option<usize>) -> Result<Self> {
        if horizon == Some(0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        check_discount(gamma)?;
        self.gamma = gamma;
        Ok(self)
    }

    /// P(· | s, a)
    pub fn next_distribution(&self, s: usize, a: usize) -> &[f64] {
        let at = (s * self.n_actions + a) * self.n_states;
        &self.transitions[at..at + self.n_states]
    }

    /// r(s, a, s')
    pub fn reward(&self, s: usize, a: usize, next: usize) -> f64 {
        self.rewards[(s * self.n_actions + a) * self.n_states + next]
    }

    /// r(s, a) = Σ_{s'} P(s'|s,a) r(s,a,s')
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        let at = (s * self.n_actions + a) * self.n_states;
        self.transitions[at..at + self.n_states]
            .iter()
            .zip(&self.rewards[at..at + self.n_states])
            .map(|(p, r)| p * r)
            .sum()
    }
}

/// One-hot encoding used as the observation of a tabular state.
pub fn one_hot(s: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

/// A policy over the states of a tabular MDP.
#[derive(Debug, Clone, PartialEq)]
pub enum TabularPolicy {
    /// Explicit `[s][a]` probabilities.
    Table { n_actions: usize, probs: Vec<f64> },
    /// Categorical network evaluated on one-hot states.
    Softmax(CategoricalPolicy),
}

impl TabularPolicy {
    pub fn table(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Length {
                what: "policy table",
                left: probs.len(),
                right: n_states * n_actions,
            });
        }
        for row in probs.chunks(n_actions) {
            check_distribution(row, "policy row")?;
        }
        Ok(TabularPolicy::Table { n_actions, probs })
    }

    /// π(· | s)
    pub fn probs(&self, s: usize, n_states: usize) -> Result<Vec<f64>> {
        match self {
            TabularPolicy::Table { n_actions, probs } => Ok(probs[s * n_actions..(s + 1) * n_actions].to_vec()),
            TabularPolicy::Softmax(p) => Ok(softmax(&p.logits(&one_hot(s, n_states))?)),
        }
    }

    fn prob_table(&self, mdp: &TabularMdp) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(mdp.n_states * mdp.n_actions);
        for s in 0..mdp.n_states {
            let p = self.probs(s, mdp.n_states)?;
            if p.len() != mdp.n_actions {
                return Err(Error::Length {
                    what: "policy actions",
                    left: p.len(),
                    right: mdp.n_actions,
                });
            }
            out.extend(p);
        }
        Ok(out)
    }

    /// ∇_θ log π(a|s) for every pair, indexed `[s * A + a]`.
    pub fn scores(&self, mdp: &TabularMdp) -> Result<Vec<Vec<f64>>> {
        let TabularPolicy::Softmax(p) = self else {
            return Err(Error::invalid("gradients need a parameterized policy"));
        };
        let policy = Policy::Categorical(p.clone());
        let tape = Tape::new();
        let mut out = Vec::with_capacity(mdp.n_states * mdp.n_actions);
        for s in 0..mdp.n_states {
            let obs = one_hot(s, mdp.n_states);
            for a in 0..mdp.n_actions {
                tape.clear();
                let g = policy.bind(&tape);
                let lp = g.log_prob(&obs, &Action::Discrete(a))?;
                tape.backward(lp)?;
                let grad = tape.grads(g.params());
                if !crate::math::is_finite_slice(&grad) {
                    return Err(Error::NonFinite("score"));
                }
                out.push(grad);
            }
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        match self {
            TabularPolicy::Table { .. } => 0,
            TabularPolicy::Softmax(p) => Policy::Categorical(p.clone()).params().len(),
        }
    }
}

/// V (per state) and Q (`[s * A + a]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

/// Q from V by one Bellman backup.
fn backup(mdp: &TabularMdp, v_next: &[f64]) -> Vec<f64> {
    let mut q = Vec::with_capacity(mdp.n_states * mdp.n_actions);
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let p = mdp.next_distribution(s, a);
            let future: f64 = p.iter().zip(v_next).map(|(p, v)| p * v).sum();
            q.push(mdp.expected_reward(s, a) + mdp.gamma * future);
        }
    }
    q
}

fn policy_average(mdp: &TabularMdp, pi: &[f64], q: &[f64]) -> Vec<f64> {
    (0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_actions)
                .map(|a| pi[s * mdp.n_actions + a] * q[s * mdp.n_actions + a])
                .sum()
        })
        .collect()
}

/// P^π as a dense matrix, `[s][s']`.
fn state_transition_matrix(mdp: &TabularMdp, pi: &[f64]) -> DMatrix<f64> {
    let n = mdp.n_states;
    DMatrix::from_fn(n, n, |s, next| {
        (0..mdp.n_actions)
            .map(|a| pi[s * mdp.n_actions + a] * mdp.next_distribution(s, a)[next])
            .sum()
    })
}

fn solve(m: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let x = m.lu().solve(&b).ok_or(Error::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(x.iter().copied().collect())
}

/// Backward induction: `(V_t, Q_t)` for `t = 0..T`.
fn finite_tables(mdp: &TabularMdp, pi: &[f64], horizon: usize) -> Vec<Values> {
    let mut out = Vec::with_capacity(horizon);
    let mut v_next = vec![0.0; mdp.n_states];
    for _ in 0..horizon {
        let q = backup(mdp, &v_next);
        let v = policy_average(mdp, pi, &q);
        v_next = v.clone();
        out.push(Values { v, q });
    }
    out.reverse();
    out
}

/// V^π and Q^π, by linear solve (infinite horizon) or backward induction.
pub fn exact_values(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Values> {
    let pi = policy.prob_table(mdp)?;
    match mdp.horizon {
        Some(t) => Ok(finite_tables(mdp, &pi, t).swap_remove(0)),
        None => {
            let n = mdp.n_states;
            let r_pi = DVector::from_iterator(
                n,
                (0..n).map(|s| {
                    (0..mdp.n_actions)
                        .map(|a| pi[s * mdp.n_actions + a] * mdp.expected_reward(s, a))
                        .sum::<f64>()
                }),
            );
            let m = DMatrix::identity(n, n) - state_transition_matrix(mdp, &pi) * mdp.gamma;
            let v = solve(m, r_pi)?;
            let q = backup(mdp, &v);
            Ok(Values { v, q })
        }
    }
}

/// `(V_t, Q_t)` for each decision step `t < T` of a finite-horizon MDP.
pub fn exact_values_by_step(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<Values>> {
    let horizon = mdp
        .horizon
        .ok_or_else(|| Error::invalid("per-step values need a finite horizon"))?;
    let pi = policy.prob_table(mdp)?;
    Ok(finite_tables(mdp, &pi, horizon))
}

/// ‖V − (r^π + γ P^π V)‖_∞ for the infinite-horizon Bellman equation.
pub fn bellman_residual(mdp: &TabularMdp, policy: &TabularPolicy, v: &[f64]) -> Result<f64> {
    let pi = policy.prob_table(mdp)?;
    let q = backup(mdp, v);
    let tv = policy_average(mdp, &pi, &q);
    Ok(v.iter().zip(&tv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// J = Σ_s ρ₀(s) V(s).
pub fn exact_objective(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let values = exact_values(mdp, policy)?;
    Ok(mdp.initial.iter().zip(&values.v).map(|(p, v)| p * v).sum())
}

/// Advantage-form gradient Σ_t γ^t Σ_s d_t(s) Σ_a π(a|s)(Q_t(s,a) − b(s)) ∇log π(a|s).
///
/// `baseline = None` means b ≡ 0. In the infinite-horizon mode the time sum
/// collapses into the discounted occupancy d = (I − γ P^πᵀ)⁻¹ ρ₀.
pub fn exact_gradient_with_baseline(
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    baseline: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if let Some(b) = baseline {
        if b.len() != mdp.n_states {
            return Err(Error::Length {
                what: "baseline",
                left: b.len(),
                right: mdp.n_states,
            });
        }
    }
    let pi = policy.prob_table(mdp)?;
    let scores = policy.scores(mdp)?;
    let dim = policy.param_count();
    let (n, na) = (mdp.n_states, mdp.n_actions);
    let mut grad = vec![0.0; dim];
    let mut accumulate = |occupancy: &[f64], q: &[f64]| {
        for s in 0..n {
            let b = baseline.map_or(0.0, |b| b[s]);
            for a in 0..na {
                let w = occupancy[s] * pi[s * na + a] * (q[s * na + a] - b);
                if w != 0.0 {
                    for (g, x) in grad.iter_mut().zip(&scores[s * na + a]) {
                        *g += w * x;
                    }
                }
            }
        }
    };
    match mdp.horizon {
        Some(t_max) => {
            let tables = finite_tables(mdp, &pi, t_max);
            let p_mat = state_transition_matrix(mdp, &pi);
            let mut d = mdp.initial.clone();
            let mut disc = 1.0;
            for table in &tables {
                let weighted: Vec<f64> = d.iter().map(|x| x * disc).collect();
                accumulate(&weighted, &table.q);
                d = (0..n)
                    .map(|next| (0..n).map(|s| d[s] * p_mat[(s, next)]).sum())
                    .collect();
                disc *= mdp.gamma;
            }
        }
        None => {
            let values = exact_values(mdp, policy)?;
            let m = DMatrix::identity(n, n) - state_transition_matrix(mdp, &pi).transpose() * mdp.gamma;
            let d = solve(m, DVector::from_column_slice(&mdp.initial))?;
            accumulate(&d, &values.q);
        }
    }
    if !crate::math::is_finite_slice(&grad) {
        return Err(Error::NonFinite("policy gradient"));
    }
    Ok(grad)
}

/// Exact ∇_θ J.
pub fn exact_policy_gradient(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<Vec<f64>> {
    exact_gradient_with_baseline(mdp, policy, None)
}

/// max_i |∇J with baseline b − ∇J with b ≡ 0|.
pub fn verify_baseline_invariance(mdp: &TabularMdp, policy: &TabularPolicy, baseline: &[f64]) -> Result<f64> {
    let with = exact_gradient_with_baseline(mdp, policy, Some(baseline))?;
    let without = exact_gradient_with_baseline(mdp, policy, None)?;
    Ok(with
        .iter()
        .zip(&without)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Number of complete trajectories (s₀, a₀, …, s_T) of a finite-horizon MDP.
pub fn trajectory_count(mdp: &TabularMdp) -> Result<u128> {
    let t = mdp
        .horizon
        .ok_or_else(|| Error::invalid("enumeration needs a finite horizon"))?;
    let branch = (mdp.n_states as u128) * (mdp.n_actions as u128);
    let mut count = mdp.n_states as u128;
    for _ in 0..t {
        count = count.saturating_mul(branch);
    }
    Ok(count)
}

struct Enumerator<'a> {
    mdp: &'a TabularMdp,
    pi: &'a [f64],
    scores: &'a [Vec<f64>],
    horizon: usize,
    running: Vec<f64>,
    total: Vec<f64>,
}

impl Enumerator<'_> {
    /// `prob` covers s₀ … s_t; `past` is Σ_{t'<t} γ^{t'} r_{t'}.
    fn visit(&mut self, t: usize, s: usize, prob: f64, past: f64, disc: f64) {
        if t == self.horizon {
            for (acc, x) in self.total.iter_mut().zip(&self.running) {
                *acc += prob * x;
            }
            return;
        }
        let na = self.mdp.n_actions;
        for a in 0..na {
            let pa = self.pi[s * na + a];
            let score = &self.scores[s * na + a];
            for (r, x) in self.running.iter_mut().zip(score) {
                *r += past * x;
            }
            for next in 0..self.mdp.n_states {
                let p = self.mdp.next_distribution(s, a)[next];
                let reward = self.mdp.reward(s, a, next);
                self.visit(t + 1, next, prob * pa * p, past + disc * reward, disc * self.mdp.gamma);
            }
            for (r, x) in self.running.iter_mut().zip(score) {
                *r -= past * x;
            }
        }
    }
}

/// Exhaustively evaluates E[Σ_t Σ_{t'<t} γ^{t'} r_{t'} ∇log π(a_t|s_t)] over
/// every trajectory of the finite horizon and returns its largest absolute
/// component, which the likelihood-ratio argument says is zero.
pub fn verify_past_reward_identity(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<f64> {
    let horizon = mdp
        .horizon
        .ok_or_else(|| Error::invalid("enumeration needs a finite horizon"))?;
    let needed = trajectory_count(mdp)?;
    if needed > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            needed,
            cap: ENUMERATION_CAP,
        });
    }
    let pi = policy.prob_table(mdp)?;
    let scores = policy.scores(mdp)?;
    let dim = policy.param_count();
    let mut e = Enumerator {
        mdp,
        pi: &pi,
        scores: &scores,
        horizon,
        running: vec![0.0; dim],
        total: vec![0.0; dim],
    };
    for s0 in 0..mdp.n_states {
        if mdp.initial[s0] > 0.0 {
            e.visit(0, s0, mdp.initial[s0], 0.0, 1.0);
        }
    }
    Ok(e.total.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_grad, Architecture, Layout, ParamVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_mdp(n: usize, na: usize, gamma: f64, horizon: Option<usize>, seed: u64) -> TabularMdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut transitions = Vec::new();
        for _ in 0..n * na {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let z: f64 = raw.iter().sum();
            transitions.extend(raw.iter().map(|x| x / z));
        }
        let rewards: Vec<f64> = (0..n * na * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let initial = raw.iter().map(|x| x / z).collect();
        TabularMdp::new(n, na, transitions, rewards, gamma, initial, horizon).unwrap()
    }

    pub(crate) fn softmax_policy(n: usize, na: usize, seed: u64) -> TabularPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch = Architecture::new(n, &[], na);
        let layout = Layout::new(arch.blocks());
        let values = (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let params = ParamVector::from_values(layout, values).unwrap();
        TabularPolicy::Softmax(CategoricalPolicy::from_params(arch, params).unwrap())
    }

    fn with_params(policy: &TabularPolicy, theta: &[f64]) -> TabularPolicy {
        let TabularPolicy::Softmax(p) = policy else {
            unreachable!()
        };
        let mut q = Policy::Categorical(p.clone());
        q.params_mut().values_mut().copy_from_slice(theta);
        let Policy::Categorical(c) = q else { unreachable!() };
        TabularPolicy::Softmax(c)
    }

    fn theta(policy: &TabularPolicy) -> Vec<f64> {
        let TabularPolicy::Softmax(p) = policy else {
            unreachable!()
        };
        Policy::Categorical(p.clone()).params().values().to_vec()
    }

    #[test]
    fn myopic_values() {
        let mdp = random_mdp(3, 2, 0.0, None, 1);
        let pol = softmax_policy(3, 2, 2);
        let vals = exact_values(&mdp, &pol).unwrap();
        for s in 0..3 {
            let p = pol.probs(s, 3).unwrap();
            let want: f64 = (0..2).map(|a| p[a] * mdp.expected_reward(s, a)).sum();
            assert!((vals.v[s] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn per_step_values_shrink_towards_the_horizon() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.5, vec![1.0], Some(3)).unwrap();
        let pol = TabularPolicy::table(1, 1, vec![1.0]).unwrap();
        let v: Vec<f64> = exact_values_by_step(&mdp, &pol)
            .unwrap()
            .iter()
            .map(|t| t.v[0])
            .collect();
        assert_eq!(v, vec![1.75, 1.5, 1.0]);
        assert!(exact_values_by_step(&mdp.with_horizon(None).unwrap(), &pol).is_err());
    }

    #[test]
    fn absorbing_state_geometric_value() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], vec![1.0], 0.9, vec![1.0], None).unwrap();
        let pol = TabularPolicy::table(1, 1, vec![1.0]).unwrap();
        let v = exact_values(&mdp, &pol).unwrap().v[0];
        assert!((v - 10.0).abs() < 1e-12);
        assert!((exact_objective(&mdp, &pol).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn objective_averages_initial_states() {
        // state 0 always pays 0, state 1 pays 0.4 per step forever: V = (0, 4)
        let mdp = TabularMdp::new(
            2,
            1,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.4, 0.4],
            0.9,
            vec![0.5, 0.5],
            None,
        )
        .unwrap();
        let pol = TabularPolicy::table(2, 1, vec![1.0, 1.0]).unwrap();
        assert!((exact_objective(&mdp, &pol).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_solve_matches_fixed_point_iteration() {
        let mdp = random_mdp(5, 3, 0.9, None, 7);
        let pol = softmax_policy(5, 3, 8);
        let vals = exact_values(&mdp, &pol).unwrap();
        // independent route: 10⁴ applications of the Bellman operator
        let mut v = vec![0.0; 5];
        for _ in 0..10_000 {
            v = (0..5)
                .map(|s| {
                    let p = pol.probs(s, 5).unwrap();
                    (0..3)
                        .map(|a| {
                            let next = mdp.next_distribution(s, a);
                            let ev: f64 = (0..5).map(|x| next[x] * (mdp.reward(s, a, x) + 0.9 * v[x])).sum();
                            p[a] * ev
                        })
                        .sum()
                })
                .collect();
        }
        for s in 0..5 {
            assert!((vals.v[s] - v[s]).abs() < 1e-10);
        }
        assert!(bellman_residual(&mdp, &pol, &vals.v).unwrap() < 1e-12);
    }

    #[test]
    fn expected_advantage_vanishes() {
        let mdp = random_mdp(4, 3, 0.8, None, 21);
        let pol = softmax_policy(4, 3, 22);
        let vals = exact_values(&mdp, &pol).unwrap();
        for s in 0..4 {
            let p = pol.probs(s, 4).unwrap();
            let e: f64 = (0..3).map(|a| p[a] * (vals.q[s * 3 + a] - vals.v[s])).sum();
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_of_objective() {
        for horizon in [None, Some(3)] {
            let mdp = random_mdp(2, 2, 0.9, horizon, 31);
            let pol = softmax_policy(2, 2, 32);
            let g = exact_policy_gradient(&mdp, &pol).unwrap();
            let fd = finite_diff_grad(
                |th| exact_objective(&mdp, &with_params(&pol, th)).unwrap(),
                &theta(&pol),
                1e-5,
            )
            .unwrap();
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-3), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn saturated_bandit_is_stationary() {
        // one state, two arms paying 1 and 0; logit gap 20 in favour of arm 0
        let mdp = TabularMdp::new(1, 2, vec![1.0, 1.0], vec![1.0, 0.0], 0.5, vec![1.0], Some(1)).unwrap();
        let arch = Architecture::new(1, &[], 2);
        let params = ParamVector::from_values(Layout::new(arch.blocks()), vec![10.0, -10.0, 0.0, 0.0]).unwrap();
        let pol = TabularPolicy::Softmax(CategoricalPolicy::from_params(arch, params).unwrap());
        let g = exact_policy_gradient(&mdp, &pol).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn exchangeable_actions_give_antisymmetric_gradient() {
        // both actions lead to the same next-state distribution and reward
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 3;
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for _ in 0..n {
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let z: f64 = raw.iter().sum();
            let row: Vec<f64> = raw.iter().map(|x| x / z).collect();
            let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                transitions.extend_from_slice(&row);
                rewards.extend_from_slice(&r);
            }
        }
        let mdp = TabularMdp::new(n, 2, transitions, rewards, 0.9, vec![1.0 / 3.0; 3], None).unwrap();
        let pol = softmax_policy(n, 2, 42);
        let g = exact_policy_gradient(&mdp, &pol).unwrap();
        // weights are [action][state], then biases [action]
        for s in 0..n {
            assert!((g[s] + g[n + s]).abs() < 1e-12);
        }
        assert!((g[2 * n] + g[2 * n + 1]).abs() < 1e-12);
    }

    #[test]
    fn past_reward_identity() {
        let mdp = random_mdp(2, 2, 0.9, Some(4), 51);
        let pol = softmax_policy(2, 2, 52);
        assert!(verify_past_reward_identity(&mdp, &pol).unwrap() < 1e-12);
        let one = mdp.clone().with_horizon(Some(1)).unwrap();
        assert_eq!(verify_past_reward_identity(&one, &pol).unwrap(), 0.0);
        let mut zero = mdp.clone();
        zero.rewards.iter_mut().for_each(|r| *r = 0.0);
        assert_eq!(verify_past_reward_identity(&zero, &pol).unwrap(), 0.0);
    }

    #[test]
    fn enumeration_cap_refuses() {
        let mdp = random_mdp(3, 3, 0.9, Some(9), 61);
        let pol = softmax_policy(3, 3, 62);
        assert!(matches!(
            verify_past_reward_identity(&mdp, &pol),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn baseline_invariance() {
        for horizon in [None, Some(4)] {
            let mdp = random_mdp(3, 2, 0.9, horizon, 71);
            let pol = softmax_policy(3, 2, 72);
            assert_eq!(verify_baseline_invariance(&mdp, &pol, &[0.0; 3]).unwrap(), 0.0);
            let v = exact_values(&mdp, &pol).unwrap().v;
            assert!(verify_baseline_invariance(&mdp, &pol, &v).unwrap() < 1e-12);
            let mut rng = ChaCha8Rng::seed_from_u64(73);
            let big: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0) * 1e6).collect();
            assert!(verify_baseline_invariance(&mdp, &pol, &big).unwrap() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(TabularMdp::new(1, 1, vec![0.9], vec![0.0], 0.9, vec![1.0], None).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 1.0, vec![1.0], None).is_err());
        assert!(TabularMdp::new(1, 1, vec![1.0], vec![0.0], 0.9, vec![0.5], None).is_err());
        assert!(TabularMdp::new(
            2,
            1,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.0; 4],
            0.9,
            vec![1.0, 0.0],
            Some(0)
        )
        .is_err());
    }
}
