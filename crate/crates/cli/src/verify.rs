//! Property suites behind `pgrad verify`: finite-difference gradient checks,
//! exact tabular identities and sampled-estimator statistics.

use std::fmt;
use std::time::Instant;

use pgrad_core::algos::{advantage_weights, reinforce_gradient, score_gradient, value_gradient, ScoreWeighting};
use pgrad_core::autodiff::{finite_diff_grad, gradient_step, max_relative_error};
use pgrad_core::envs::{ActionMode, ChainMdpEnv};
use pgrad_core::oracle::{
    bellman_residual, exact_objective, exact_policy_gradient, exact_values, exact_values_by_step,
    verify_baseline_invariance, verify_past_reward_identity,
};
use pgrad_core::policy::{StdMode, ValueGraph};
use pgrad_core::returns::{bootstrap_targets, discounted_returns, value_loss, TargetConfig, TargetHorizon, ValueTable};
use pgrad_core::{
    Action, CategoricalPolicy, Collector, GaussianPolicy, Policy, Result, TabularMdp, TabularPolicy, Tape,
    TrajectoryBuffer, ValueFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mdp_io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Gradcheck,
    Identities,
    Unbiasedness,
    /// TD convergence and the variance trend over the bootstrap window.
    Critic,
    All,
}

/// One property: passes when `measured < threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Check {
            name: name.to_string(),
            measured,
            threshold,
            detail,
        }
    }

    pub fn passed(&self) -> bool {
        self.measured < self.threshold
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (threshold {:.1e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, " {}", self.detail)?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite) -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Gradcheck | Suite::All) {
        out.extend(gradcheck(100, 0)?);
    }
    if matches!(suite, Suite::Identities | Suite::All) {
        out.extend(identities()?);
    }
    if matches!(suite, Suite::Unbiasedness | Suite::All) {
        out.extend(unbiasedness(100_000, 0)?.checks());
    }
    if matches!(suite, Suite::Critic | Suite::All) {
        out.push(td_convergence(0)?.check());
        out.push(bootstrap_variance_curve(20_000, 0)?.check());
    }
    Ok(out)
}

pub const FD_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Relative errors are taken against max(|a|, |b|, this).
pub const RELATIVE_FLOOR: f64 = 1e-6;

fn random_obs(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn random_hidden(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let depth = rng.random_range(0..3);
    (0..depth).map(|_| rng.random_range(1..7)).collect()
}

fn perturb(values: &mut [f64], rng: &mut ChaCha8Rng, scale: f64) {
    for v in values {
        *v += rng.random_range(-scale..scale);
    }
}

fn policy_with(policy: &Policy, params: &[f64]) -> Policy {
    let mut p = policy.clone();
    p.params_mut().values_mut().copy_from_slice(params);
    p
}

fn value_with(vf: &ValueFunction, params: &[f64]) -> ValueFunction {
    let mut v = vf.clone();
    v.params_mut().values_mut().copy_from_slice(params);
    v
}

/// Σ log π(a|o) over a small batch.
fn log_prob_sum(policy: &Policy, batch: &[(Vec<f64>, Action)]) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let g = policy.bind(&tape);
    let lps = batch
        .iter()
        .map(|(o, a)| g.log_prob(o, a))
        .collect::<Result<Vec<_>>>()?;
    let root = tape.sum(&lps);
    tape.backward(root)?;
    Ok((root.value(), tape.grads(g.params())))
}

/// Mean entropy over the batch observations.
fn entropy_mean(policy: &Policy, batch: &[(Vec<f64>, Action)]) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let g = policy.bind(&tape);
    let hs = batch.iter().map(|(o, _)| g.entropy(o)).collect::<Result<Vec<_>>>()?;
    let root = tape.mean(&hs);
    tape.backward(root)?;
    Ok((root.value(), tape.grads(g.params())))
}

fn critic_loss(vf: &ValueFunction, obs: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let g: ValueGraph = vf.bind(&tape);
    let vs = obs.iter().map(|o| g.value(o)).collect::<Result<Vec<_>>>()?;
    let root = value_loss(&vs, targets)?;
    tape.backward(root)?;
    Ok((root.value(), tape.grads(g.params())))
}

fn relative_gap<F>(f: F, params: &[f64], analytic: &[f64]) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let numeric = finite_diff_grad(f, params, FD_STEP)?;
    Ok(max_relative_error(analytic, &numeric, RELATIVE_FLOOR))
}

/// Random policies (Gaussian with either σ mode, categorical) and critics of
/// random shape; the worst relative error per differentiated quantity.
pub fn gradcheck(networks: usize, seed: u64) -> anyhow::Result<Vec<Check>> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    for i in 0..networks {
        let obs_dim = rng.random_range(1..5);
        let hidden = random_hidden(&mut rng);
        let mut policy = match i % 3 {
            0 => Policy::Gaussian(GaussianPolicy::new(
                obs_dim,
                &hidden,
                rng.random_range(1..4),
                StdMode::StateIndependent,
                &mut rng,
            )?),
            1 => Policy::Gaussian(GaussianPolicy::new(
                obs_dim,
                &hidden,
                rng.random_range(1..4),
                StdMode::StateDependent,
                &mut rng,
            )?),
            _ => Policy::Categorical(CategoricalPolicy::new(
                obs_dim,
                &hidden,
                rng.random_range(2..5),
                &mut rng,
            )?),
        };
        perturb(policy.params_mut().values_mut(), &mut rng, 0.3);
        let batch: Vec<(Vec<f64>, Action)> = (0..3)
            .map(|_| {
                let o = random_obs(&mut rng, obs_dim);
                let (a, _) = policy.sample_action(&o, &mut rng)?;
                Ok((o, a))
            })
            .collect::<Result<_>>()?;
        let theta = policy.params().values().to_vec();

        let (_, g) = log_prob_sum(&policy, &batch)?;
        let gap = relative_gap(
            |p| log_prob_sum(&policy_with(&policy, p), &batch).map_or(f64::NAN, |x| x.0),
            &theta,
            &g,
        )?;
        worst[0] = worst[0].max(gap);

        let (_, g) = entropy_mean(&policy, &batch)?;
        let gap = relative_gap(
            |p| entropy_mean(&policy_with(&policy, p), &batch).map_or(f64::NAN, |x| x.0),
            &theta,
            &g,
        )?;
        worst[1] = worst[1].max(gap);

        let mut vf = ValueFunction::new(obs_dim, &random_hidden(&mut rng), &mut rng)?;
        perturb(vf.params_mut().values_mut(), &mut rng, 0.3);
        let obs: Vec<Vec<f64>> = (0..4).map(|_| random_obs(&mut rng, obs_dim)).collect();
        let targets: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let phi = vf.params().values().to_vec();
        let (_, g) = critic_loss(&vf, &obs, &targets)?;
        let gap = relative_gap(
            |p| critic_loss(&value_with(&vf, p), &obs, &targets).map_or(f64::NAN, |x| x.0),
            &phi,
            &g,
        )?;
        worst[2] = worst[2].max(gap);
    }
    let detail = format!(
        "over {networks} networks, step {FD_STEP:e}, {:.1}s",
        start.elapsed().as_secs_f64()
    );
    Ok(["gradcheck log_prob", "gradcheck entropy", "gradcheck value_loss"]
        .iter()
        .zip(worst)
        .map(|(name, w)| Check::new(name, w, GRADCHECK_TOLERANCE, detail.clone()))
        .collect())
}

/// Linear softmax policy on one-hot states with parameters uniform in ±1.
pub fn softmax_policy(n_states: usize, n_actions: usize, seed: u64) -> anyhow::Result<CategoricalPolicy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Policy::Categorical(CategoricalPolicy::new(n_states, &[], n_actions, &mut rng)?);
    let params: Vec<f64> = (0..init.params().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(with_params_of(&init, &params))
}

fn with_params_of(policy: &Policy, params: &[f64]) -> CategoricalPolicy {
    match policy_with(policy, params) {
        Policy::Categorical(c) => c,
        Policy::Gaussian(_) => unreachable!("categorical in, categorical out"),
    }
}

fn tabular(p: &CategoricalPolicy) -> TabularPolicy {
    TabularPolicy::Softmax(p.clone())
}

fn with_params(p: &CategoricalPolicy, params: &[f64]) -> CategoricalPolicy {
    with_params_of(&Policy::Categorical(p.clone()), params)
}

fn objective_gradient_gap(mdp: &TabularMdp, p: &CategoricalPolicy) -> anyhow::Result<f64> {
    let exact = exact_policy_gradient(mdp, &tabular(p))?;
    let theta = Policy::Categorical(p.clone()).params().values().to_vec();
    let numeric = finite_diff_grad(
        |x| exact_objective(mdp, &tabular(&with_params(p, x))).unwrap_or(f64::NAN),
        &theta,
        FD_STEP,
    )?;
    Ok(max_relative_error(&exact, &numeric, RELATIVE_FLOOR))
}

/// Exact oracle identities on the shipped MDPs.
pub fn identities() -> anyhow::Result<Vec<Check>> {
    let two = mdp_io::two_state();
    let five = mdp_io::five_state();
    let p2 = softmax_policy(2, 2, 11)?;
    let p5 = softmax_policy(5, 3, 12)?;
    let mut out = Vec::new();

    let dev = verify_past_reward_identity(&two, &tabular(&p2))?;
    out.push(Check::new(
        "past-reward identity (2-state, T=4)",
        dev,
        1e-12,
        "max |E[Σ_{t'<t} γ^t' r_t' ∇log π(a_t|s_t)]| by enumeration".into(),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let v = exact_values(&two, &tabular(&p2))?.v;
    let baselines = [
        ("exact V", v),
        ("constant 5", vec![5.0; 2]),
        ("uniform ±10", (0..2).map(|_| rng.random_range(-10.0..10.0)).collect()),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, b) in &baselines {
        let d = verify_baseline_invariance(&two, &tabular(&p2), b)?;
        parts.push(format!("{name} {d:.1e}"));
        worst = worst.max(d);
    }
    let v5 = exact_values(&five, &tabular(&p5))?.v;
    let random5: Vec<f64> = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
    for (name, b) in [("5-state exact V", v5.clone()), ("5-state uniform ±10", random5)] {
        let d = verify_baseline_invariance(&five, &tabular(&p5), &b)?;
        parts.push(format!("{name} {d:.1e}"));
        worst = worst.max(d);
    }
    out.push(Check::new("baseline invariance", worst, 1e-12, parts.join(", ")));

    let res = bellman_residual(&five, &tabular(&p5), &v5)?;
    out.push(Check::new("Bellman residual (5-state)", res, 1e-12, String::new()));

    let g2 = objective_gradient_gap(&two, &p2)?;
    let g5 = objective_gradient_gap(&five, &p5)?;
    out.push(Check::new(
        "exact gradient vs finite differences",
        g2.max(g5),
        1e-6,
        format!("2-state {g2:.1e}, 5-state {g5:.1e}"),
    ));
    Ok(out)
}

/// Running mean and variance per component.
#[derive(Debug, Clone)]
pub struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        Moments {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Vec<f64> {
        self.m2.iter().map(|s| s / (self.n - 1.0)).collect()
    }

    pub fn standard_error(&self) -> Vec<f64> {
        self.variance().iter().map(|v| (v / self.n).sqrt()).collect()
    }

    /// max_i |mean_i − target_i| / se_i.
    pub fn max_z(&self, target: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(target)
            .zip(self.standard_error())
            .map(|((m, t), se)| (m - t).abs() / se)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorStudy {
    pub episodes: usize,
    pub exact: Vec<f64>,
    pub reinforce: Moments,
    pub advantage: Moments,
    pub seconds: f64,
}

impl EstimatorStudy {
    /// Per-component variance of the advantage form over REINFORCE's.
    pub fn variance_ratios(&self) -> Vec<f64> {
        self.advantage
            .variance()
            .iter()
            .zip(self.reinforce.variance())
            .map(|(a, r)| a / r)
            .collect()
    }

    pub fn checks(&self) -> Vec<Check> {
        let fmt = |xs: &[f64]| xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        let ratios = self.variance_ratios();
        vec![
            Check::new(
                "REINFORCE mean within 3 SE of exact gradient",
                self.reinforce.max_z(&self.exact),
                3.0,
                format!(
                    "max z over components, {} episodes, {:.1}s",
                    self.episodes, self.seconds
                ),
            ),
            Check::new(
                "advantage-form mean within 3 SE of exact gradient",
                self.advantage.max_z(&self.exact),
                3.0,
                "exact V_t baseline".into(),
            ),
            Check::new(
                "variance ratio advantage/REINFORCE below 1",
                ratios.iter().copied().fold(0.0, f64::max),
                1.0,
                format!("per component [{}]", fmt(&ratios)),
            ),
        ]
    }
}

/// Single-episode gradient estimates on the shipped 2-state MDP.
///
/// REINFORCE weights each score by γ^t R_t; the advantage form uses
/// γ^t (R_t − V_t(s_t)) with the exact time-indexed value as baseline.
/// Both estimators see the same episodes.
pub fn unbiasedness(episodes: usize, seed: u64) -> anyhow::Result<EstimatorStudy> {
    let start = Instant::now();
    let mdp = mdp_io::two_state();
    let horizon = mdp.horizon().expect("shipped two-state MDP is finite-horizon");
    let cat = softmax_policy(2, 2, 21)?;
    let exact = exact_policy_gradient(&mdp, &tabular(&cat))?;
    let by_step = exact_values_by_step(&mdp, &tabular(&cat))?;
    let policy = Policy::Categorical(cat);
    let dim = policy.params().len();
    let gamma = mdp.gamma();
    let mut collector = Collector::new(ChainMdpEnv::new(mdp, horizon as u64)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reinforce = Moments::new(dim);
    let mut advantage = Moments::new(dim);
    for _ in 0..episodes {
        let buffer = collector.rollout(&policy, horizon, gamma, ActionMode::Sample, &mut rng)?;
        reinforce.push(&reinforce_gradient(&policy, &buffer)?);
        let returns = discounted_returns(&buffer.rewards(), gamma)?;
        let adv: Vec<f64> = buffer
            .transitions()
            .iter()
            .zip(returns)
            .map(|(t, r)| r - by_step[t.step as usize].v[state_of(&t.observation)])
            .collect();
        let w = advantage_weights(&buffer, &adv, ScoreWeighting::Discounted)?;
        advantage.push(&score_gradient(&policy, buffer.transitions(), &w)?);
    }
    Ok(EstimatorStudy {
        episodes,
        exact,
        reinforce,
        advantage,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn state_of(one_hot: &[f64]) -> usize {
    one_hot.iter().position(|x| *x == 1.0).expect("one-hot observation")
}

#[derive(Debug, Clone)]
pub struct TdResult {
    pub max_error: f64,
    pub learned: Vec<f64>,
    pub exact: Vec<f64>,
    pub iterations: usize,
    pub seconds: f64,
}

impl TdResult {
    pub fn check(&self) -> Check {
        Check::new(
            "TD(K=1) critic error on 5-state MDP",
            self.max_error,
            1e-2,
            format!(
                "max_s |V_φ − V^π| after {} iterations, {:.1}s",
                self.iterations, self.seconds
            ),
        )
    }
}

pub const TD_ITERATIONS: usize = 3000;
pub const TD_BATCH: usize = 2048;

/// Semi-gradient TD(0) on the 5-state MDP under a fixed softmax policy.
///
/// The critic is linear in the one-hot state. Each iteration regresses onto
/// one-step bootstrapped targets r + γ V(s') computed from the current critic
/// over a fresh batch, with a step size decaying as 1/k. The reported critic
/// averages the parameters over the second half of the iterations.
pub fn td_convergence(seed: u64) -> anyhow::Result<TdResult> {
    let start = Instant::now();
    let mdp = mdp_io::five_state();
    let cat = softmax_policy(5, 3, 31)?;
    let exact = exact_values(&mdp, &tabular(&cat))?.v;
    let policy = Policy::Categorical(cat);
    let gamma = mdp.gamma();
    let mut collector = Collector::new(ChainMdpEnv::new(mdp, 100)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vf = ValueFunction::zeros(5, &[])?;
    let mut averaged = vec![0.0; vf.params().len()];
    let cfg = TargetConfig {
        horizon: TargetHorizon::Fixed(1),
        ..TargetConfig::default()
    };
    for k in 0..TD_ITERATIONS {
        let buffer = collector.rollout(&policy, TD_BATCH, gamma, ActionMode::Sample, &mut rng)?;
        let table = ValueTable::evaluate(&buffer, &vf)?;
        let targets = bootstrap_targets(&buffer, &cfg, &table)?;
        let (_, grad) = value_gradient(&vf, buffer.transitions(), &targets)?;
        let lr = 4.0 / (1.0 + k as f64 / 20.0);
        gradient_step(vf.params_mut().values_mut(), &grad, -lr)?;
        if k >= TD_ITERATIONS / 2 {
            let weight = 1.0 / (k + 1 - TD_ITERATIONS / 2) as f64;
            for (a, p) in averaged.iter_mut().zip(vf.params().values()) {
                *a += weight * (p - *a);
            }
        }
    }
    vf.params_mut().values_mut().copy_from_slice(&averaged);
    let learned: Vec<f64> = (0..5)
        .map(|s| vf.value(&pgrad_core::oracle::one_hot(s, 5)))
        .collect::<Result<_>>()?;
    let max_error = learned
        .iter()
        .zip(&exact)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(TdResult {
        max_error,
        learned,
        exact,
        iterations: TD_ITERATIONS,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct VarianceCurve {
    /// Total variance (trace of the covariance) of the gradient estimate for K = 1..=8.
    pub variance: Vec<f64>,
    pub episodes: usize,
    pub seconds: f64,
}

impl VarianceCurve {
    pub fn monotone(&self) -> bool {
        self.variance.windows(2).all(|w| w[0] < w[1])
    }

    /// Passes when var(K=1)/var(K=8) < 1.
    pub fn check(&self) -> Check {
        let first = self.variance[0];
        let last = *self.variance.last().expect("nonempty curve");
        let curve = self
            .variance
            .iter()
            .enumerate()
            .map(|(k, v)| format!("K={}:{v:.4}", k + 1))
            .collect::<Vec<_>>()
            .join(" ");
        Check::new(
            "gradient variance K=1 over K=8",
            first / last,
            1.0,
            format!("[{curve}] monotone={} {:.1}s", self.monotone(), self.seconds),
        )
    }
}

pub const TREND_EPISODE_STEPS: usize = 20;

/// Variance of the K-step bootstrapped advantage-form gradient estimate.
///
/// Each sample is one 20-step episode on the 5-state MDP; targets sum K
/// rewards and bootstrap from the exact V^π, advantages subtract V^π(s_t).
/// Every K sees the same episodes.
pub fn bootstrap_variance_curve(episodes: usize, seed: u64) -> anyhow::Result<VarianceCurve> {
    let start = Instant::now();
    let mdp = mdp_io::five_state();
    let cat = softmax_policy(5, 3, 41)?;
    let v = exact_values(&mdp, &tabular(&cat))?.v;
    let v_of = |o: &[f64]| v[state_of(o)];
    let policy = Policy::Categorical(cat);
    let dim = policy.params().len();
    let gamma = mdp.gamma();
    let mut collector = Collector::new(ChainMdpEnv::new(mdp, TREND_EPISODE_STEPS as u64)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moments: Vec<Moments> = (0..8).map(|_| Moments::new(dim)).collect();
    for _ in 0..episodes {
        let buffer: TrajectoryBuffer =
            collector.rollout(&policy, TREND_EPISODE_STEPS, gamma, ActionMode::Sample, &mut rng)?;
        let table = ValueTable::evaluate(&buffer, &v_of)?;
        for (k, m) in moments.iter_mut().enumerate() {
            let cfg = TargetConfig {
                horizon: TargetHorizon::Fixed(k + 1),
                ..TargetConfig::default()
            };
            let q = bootstrap_targets(&buffer, &cfg, &table)?;
            let adv: Vec<f64> = q.iter().zip(&table.observation).map(|(q, v)| q - v).collect();
            let w = advantage_weights(&buffer, &adv, ScoreWeighting::Discounted)?;
            m.push(&score_gradient(&policy, buffer.transitions(), &w)?);
        }
    }
    Ok(VarianceCurve {
        variance: moments.iter().map(|m| m.variance().iter().sum()).collect(),
        episodes,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_direct_formulas() {
        let mut m = Moments::new(1);
        for x in [1.0, 2.0, 4.0] {
            m.push(&[x]);
        }
        assert!((m.mean()[0] - 7.0 / 3.0).abs() < 1e-15);
        assert!((m.variance()[0] - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_gradcheck_passes() {
        for c in gradcheck(6, 9).unwrap() {
            assert!(c.passed(), "{c}");
        }
    }
}
