//! Policy-gradient update rules.
//!
//! * [`reinforce_update`]: Monte-Carlo returns as action scores.
//! * [`actor_critic_update`]: bootstrapped advantages with a learned critic.
//! * [`ppo_update`]: clipped surrogate, entropy bonus and critic regression,
//!   several full-batch epochs per buffer.
//!
//! Gradients are accumulated over fixed-size chunks of the buffer, each
//! recorded on a fresh tape, so memory stays bounded for long buffers.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::autodiff::{gradient_step, Adam, Tape, Var};
use crate::math;
use crate::policy::{Policy, ValueFunction};
use crate::returns::{
    advantages, bootstrap_targets, normalize_advantages, value_loss, TargetConfig, TrajectoryBuffer, Transition,
    ValueTable,
};
use crate::{Error, Result};

const CHUNK: usize = 64;

/// Diagnostics for one gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    /// Share of samples whose ratio lies outside `[1 − ε, 1 + ε]`.
    pub clip_fraction: f64,
    /// mean(log π_old − log π_new)
    pub approx_kl: f64,
    pub grad_norm: f64,
}

fn chunks(n: usize) -> impl Iterator<Item = Range<usize>> {
    (0..n).step_by(CHUNK).map(move |s| s..(s + CHUNK).min(n))
}

fn ensure_nonempty(buffer: &TrajectoryBuffer) -> Result<()> {
    if buffer.is_empty() {
        Err(Error::Empty("trajectory buffer"))
    } else {
        Ok(())
    }
}

/// Σ_i w_i ∇_θ log π_θ(a_i | o_i).
pub fn score_gradient(policy: &Policy, transitions: &[Transition], weights: &[f64]) -> Result<Vec<f64>> {
    if transitions.len() != weights.len() {
        return Err(Error::Length {
            what: "transitions/weights",
            left: transitions.len(),
            right: weights.len(),
        });
    }
    let mut grad = vec![0.0; policy.params().len()];
    let tape = Tape::new();
    for range in chunks(transitions.len()) {
        let w = &weights[range.clone()];
        if w.iter().all(|x| *x == 0.0) {
            continue;
        }
        tape.clear();
        let g = policy.bind(&tape);
        let lps = transitions[range]
            .iter()
            .map(|t| g.log_prob(&t.observation, &t.action))
            .collect::<Result<Vec<_>>>()?;
        tape.backward(tape.weighted_sum(w, &lps))?;
        tape.accumulate_grads(g.params(), &mut grad);
    }
    Ok(grad)
}

/// Critic loss 0.5·mean((V_φ − target)²) over the whole buffer and its gradient.
pub fn value_gradient(vf: &ValueFunction, transitions: &[Transition], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if transitions.len() != targets.len() {
        return Err(Error::Length {
            what: "transitions/targets",
            left: transitions.len(),
            right: targets.len(),
        });
    }
    if transitions.is_empty() {
        return Err(Error::Empty("value loss inputs"));
    }
    let n = transitions.len() as f64;
    let mut grad = vec![0.0; vf.params().len()];
    let mut loss = 0.0;
    let tape = Tape::new();
    for range in chunks(transitions.len()) {
        tape.clear();
        let g = vf.bind(&tape);
        let share = range.len() as f64 / n;
        let values = transitions[range.clone()]
            .iter()
            .map(|t| g.value(&t.observation))
            .collect::<Result<Vec<_>>>()?;
        let l = value_loss(&values, &targets[range])? * share;
        loss += l.value();
        tape.backward(l)?;
        tape.accumulate_grads(g.params(), &mut grad);
    }
    Ok((loss, grad))
}

/// Blocks that start at step 0 and end with an episode ending.
fn complete_episodes(buffer: &TrajectoryBuffer) -> Vec<Range<usize>> {
    let ts = buffer.transitions();
    buffer
        .blocks()
        .into_iter()
        .filter(|r| ts[r.start].step == 0 && ts[r.end - 1].end.is_some())
        .collect()
}

/// Weights γ^t R_t / M on every transition of the M complete episodes
/// (zero elsewhere), and the mean discounted episode return.
fn reinforce_weights(buffer: &TrajectoryBuffer) -> Result<(Vec<f64>, f64)> {
    ensure_nonempty(buffer)?;
    let episodes = complete_episodes(buffer);
    if episodes.is_empty() {
        return Err(Error::Empty("complete episodes"));
    }
    let m = episodes.len() as f64;
    let gamma = buffer.gamma();
    let ts = buffer.transitions();
    let mut weights = vec![0.0; buffer.len()];
    let mut mean_return = 0.0;
    for r in episodes {
        let rewards: Vec<f64> = ts[r.clone()].iter().map(|t| t.reward).collect();
        let returns = crate::returns::discounted_returns(&rewards, gamma)?;
        mean_return += returns[0] / m;
        let mut disc = 1.0;
        for (i, ret) in r.zip(returns) {
            weights[i] = disc * ret / m;
            disc *= gamma;
        }
    }
    Ok((weights, mean_return))
}

/// (1/M) Σ_j Σ_t γ^t R_t^j ∇_θ log π_θ(a_t^j | o_t^j) over the complete
/// episodes of the buffer.
pub fn reinforce_gradient(policy: &Policy, buffer: &TrajectoryBuffer) -> Result<Vec<f64>> {
    let (weights, _) = reinforce_weights(buffer)?;
    score_gradient(policy, buffer.transitions(), &weights)
}

fn norm(xs: &[f64]) -> f64 {
    math::sqrt(math::norm_sq(xs))
}

fn mean_entropy(policy: &Policy, transitions: &[Transition]) -> Result<f64> {
    let mut total = 0.0;
    for t in transitions {
        total += policy.distribution(&t.observation)?.entropy();
    }
    Ok(total / transitions.len() as f64)
}

fn non_finite_check(grad: &[f64]) -> Result<()> {
    let bad: Vec<usize> = grad
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_finite())
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient(bad))
    }
}

/// One ascent step θ ← θ + lr·ĝ with the REINFORCE estimate.
pub fn reinforce_update(buffer: &TrajectoryBuffer, policy: &mut Policy, learning_rate: f64) -> Result<UpdateReport> {
    let (weights, mean_return) = reinforce_weights(buffer)?;
    let grad = score_gradient(policy, buffer.transitions(), &weights)?;
    non_finite_check(&grad)?;
    let entropy = mean_entropy(policy, buffer.transitions())?;
    gradient_step(policy.params_mut().values_mut(), &grad, learning_rate)?;
    Ok(UpdateReport {
        policy_loss: -mean_return,
        entropy,
        mean_ratio: 1.0,
        grad_norm: norm(&grad),
        ..UpdateReport::default()
    })
}

/// How score terms are weighted across a buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreWeighting {
    /// γ^t Â_t summed per episode and averaged over episodes.
    #[default]
    Discounted,
    /// Plain average of Â_t over the stored steps.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticConfig {
    pub targets: TargetConfig,
    pub policy_learning_rate: f64,
    pub value_learning_rate: f64,
    pub normalize_advantages: bool,
    pub weighting: ScoreWeighting,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        ActorCriticConfig {
            targets: TargetConfig::default(),
            policy_learning_rate: 1e-2,
            value_learning_rate: 1e-2,
            normalize_advantages: false,
            weighting: ScoreWeighting::Discounted,
        }
    }
}

/// Per-transition multipliers of ∇ log π for the advantage-form estimator.
pub fn advantage_weights(buffer: &TrajectoryBuffer, adv: &[f64], weighting: ScoreWeighting) -> Result<Vec<f64>> {
    ensure_nonempty(buffer)?;
    if adv.len() != buffer.len() {
        return Err(Error::Length {
            what: "advantages/buffer",
            left: adv.len(),
            right: buffer.len(),
        });
    }
    match weighting {
        ScoreWeighting::Uniform => {
            let n = adv.len() as f64;
            Ok(adv.iter().map(|a| a / n).collect())
        }
        ScoreWeighting::Discounted => {
            let blocks = buffer.blocks();
            let m = blocks.len() as f64;
            let gamma = buffer.gamma();
            let ts = buffer.transitions();
            let mut out = vec![0.0; adv.len()];
            for r in blocks {
                let mut disc = math::pow(gamma, ts[r.start].step as f64);
                for i in r {
                    out[i] = disc * adv[i] / m;
                    disc *= gamma;
                }
            }
            Ok(out)
        }
    }
}

fn targets_and_advantages(
    buffer: &TrajectoryBuffer,
    targets_cfg: &TargetConfig,
    table: &ValueTable,
    normalize: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let targets = bootstrap_targets(buffer, targets_cfg, table)?;
    let mut adv = advantages(&targets, &table.observation)?;
    if normalize && adv.len() >= 2 {
        adv = normalize_advantages(&adv)?;
    }
    Ok((targets, adv))
}

/// Advantage-form policy ascent step plus one critic descent step.
pub fn actor_critic_update(
    buffer: &TrajectoryBuffer,
    policy: &mut Policy,
    vf: &mut ValueFunction,
    config: &ActorCriticConfig,
) -> Result<UpdateReport> {
    ensure_nonempty(buffer)?;
    let table = ValueTable::evaluate(buffer, vf)?;
    let (targets, adv) = targets_and_advantages(buffer, &config.targets, &table, config.normalize_advantages)?;
    let weights = advantage_weights(buffer, &adv, config.weighting)?;
    let policy_grad = score_gradient(policy, buffer.transitions(), &weights)?;
    let (vloss, value_grad) = value_gradient(vf, buffer.transitions(), &targets)?;
    non_finite_check(&policy_grad)?;
    non_finite_check(&value_grad)?;
    let entropy = mean_entropy(policy, buffer.transitions())?;
    gradient_step(
        policy.params_mut().values_mut(),
        &policy_grad,
        config.policy_learning_rate,
    )?;
    gradient_step(vf.params_mut().values_mut(), &value_grad, -config.value_learning_rate)?;
    let surrogate: f64 = weights.iter().sum();
    Ok(UpdateReport {
        policy_loss: -surrogate,
        value_loss: vloss,
        entropy,
        mean_ratio: 1.0,
        grad_norm: math::sqrt(math::norm_sq(&policy_grad) + math::norm_sq(&value_grad)),
        ..UpdateReport::default()
    })
}

/// ϱ = exp(log π_new − log π_old); only `logp_new` carries a gradient.
pub fn compute_ratio<'t>(logp_new: Var<'t>, logp_old: f64) -> Result<Var<'t>> {
    if !logp_old.is_finite() || !logp_new.value().is_finite() {
        return Err(Error::NonFinite("log-probability"));
    }
    Ok((logp_new - logp_old).exp())
}

/// mean_i min(ϱ_i Â_i, clip(ϱ_i, 1 − ε, 1 + ε) Â_i).
pub fn clipped_surrogate<'t>(ratios: &[Var<'t>], adv: &[f64], clip: f64) -> Result<Var<'t>> {
    if ratios.is_empty() {
        return Err(Error::Empty("surrogate inputs"));
    }
    if ratios.len() != adv.len() {
        return Err(Error::Length {
            what: "ratios/advantages",
            left: ratios.len(),
            right: adv.len(),
        });
    }
    if !(clip > 0.0) {
        return Err(Error::invalid("clip range must be positive"));
    }
    let tape = ratios[0].tape();
    let terms: Vec<Var<'t>> = ratios
        .iter()
        .zip(adv)
        .map(|(&r, &a)| (r * a).min(r.clamp(1.0 - clip, 1.0 + clip) * a))
        .collect();
    Ok(tape.mean(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub clip: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    /// Transitions collected per update.
    pub horizon: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub value_learning_rate: f64,
    pub normalize_advantages: bool,
    pub targets: TargetConfig,
    /// Keep the values of post-episode observations from the first epoch.
    pub freeze_bootstrap: bool,
    /// Stop the epoch loop once approximate KL exceeds this.
    pub kl_ceiling: Option<f64>,
    /// Multiplies rewards before targets are built; episode statistics are unaffected.
    pub reward_scale: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            entropy_coef: 0.01,
            epochs: 10,
            horizon: 2048,
            gamma: 0.99,
            learning_rate: 3e-4,
            value_learning_rate: 1e-3,
            normalize_advantages: true,
            targets: TargetConfig::default(),
            freeze_bootstrap: false,
            kl_ceiling: None,
            reward_scale: 1.0,
        }
    }
}

impl PpoConfig {
    /// Errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, why: &str| Err(Error::invalid(alloc::format!("{field}: {why}")));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return fail("clip", &alloc::format!("{} outside (0, 1)", self.clip));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return fail("entropy_coef", "must be nonnegative");
        }
        if self.epochs == 0 {
            return fail("epochs", "must be positive");
        }
        if self.horizon == 0 {
            return fail("horizon", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate", "must be positive");
        }
        if !(self.value_learning_rate > 0.0 && self.value_learning_rate.is_finite()) {
            return fail("value_learning_rate", "must be positive");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return fail("reward_scale", "must be positive");
        }
        if let Some(k) = self.kl_ceiling {
            if !(k > 0.0) {
                return fail("kl_ceiling", "must be positive");
            }
        }
        if let crate::returns::TargetHorizon::Fixed(0) = self.targets.horizon {
            return fail("targets.horizon", "a fixed window needs at least one step");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail("gamma", &alloc::format!("{} outside [0, 1)", self.gamma));
        }
        Ok(())
    }
}

/// Policy, critic and their optimizer states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub policy: Policy,
    pub value: ValueFunction,
    pub policy_optimizer: Adam,
    pub value_optimizer: Adam,
}

impl Agent {
    pub fn new(policy: Policy, value: ValueFunction, config: &PpoConfig) -> Self {
        let policy_optimizer = Adam::new(policy.params().len(), config.learning_rate);
        let value_optimizer = Adam::new(value.params().len(), config.value_learning_rate);
        Agent {
            policy,
            value,
            policy_optimizer,
            value_optimizer,
        }
    }
}

/// Gradients of L = −L_clip + L_value − α·H with respect to θ and φ.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoGradients {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
    pub loss: f64,
    pub report: UpdateReport,
}

/// Evaluates the total loss and its gradients at the agent's current
/// parameters, with log π_old taken from the buffer.
pub fn ppo_gradients(
    buffer: &TrajectoryBuffer,
    policy: &Policy,
    vf: &ValueFunction,
    adv: &[f64],
    targets: &[f64],
    clip: f64,
    entropy_coef: f64,
) -> Result<PpoGradients> {
    ensure_nonempty(buffer)?;
    let n = buffer.len();
    if adv.len() != n || targets.len() != n {
        return Err(Error::Length {
            what: "advantages/targets",
            left: adv.len(),
            right: targets.len(),
        });
    }
    let ts = buffer.transitions();
    let mut gp = vec![0.0; policy.params().len()];
    let mut gv = vec![0.0; vf.params().len()];
    let (mut surrogate, mut vloss, mut entropy, mut loss) = (0.0, 0.0, 0.0, 0.0);
    let (mut ratio_sum, mut clipped, mut kl) = (0.0, 0usize, 0.0);
    let tape = Tape::new();
    for range in chunks(n) {
        tape.clear();
        let pg = policy.bind(&tape);
        let vg = vf.bind(&tape);
        let share = range.len() as f64 / n as f64;
        let mut ratios = Vec::with_capacity(range.len());
        let mut ents = Vec::with_capacity(range.len());
        let mut values = Vec::with_capacity(range.len());
        for t in &ts[range.clone()] {
            let (lp, ent) = pg.log_prob_and_entropy(&t.observation, &t.action)?;
            let r = compute_ratio(lp, t.log_prob)?;
            ratio_sum += r.value();
            if (r.value() - 1.0).abs() > clip {
                clipped += 1;
            }
            kl += t.log_prob - lp.value();
            ratios.push(r);
            ents.push(ent);
            values.push(vg.value(&t.observation)?);
        }
        let s = clipped_surrogate(&ratios, &adv[range.clone()], clip)?;
        let v = value_loss(&values, &targets[range])?;
        let h = tape.mean(&ents);
        surrogate += share * s.value();
        vloss += share * v.value();
        entropy += share * h.value();
        let total = (v - s - h * entropy_coef) * share;
        loss += total.value();
        tape.backward(total)?;
        tape.accumulate_grads(pg.params(), &mut gp);
        tape.accumulate_grads(vg.params(), &mut gv);
    }
    let n = n as f64;
    let report = UpdateReport {
        policy_loss: -surrogate,
        value_loss: vloss,
        entropy,
        mean_ratio: ratio_sum / n,
        clip_fraction: clipped as f64 / n,
        approx_kl: kl / n,
        grad_norm: math::sqrt(math::norm_sq(&gp) + math::norm_sq(&gv)),
    };
    Ok(PpoGradients {
        policy: gp,
        value: gv,
        loss,
        report,
    })
}

fn ppo_epochs(buffer: &TrajectoryBuffer, agent: &mut Agent, config: &PpoConfig) -> Result<Vec<UpdateReport>> {
    agent.policy_optimizer.learning_rate = config.learning_rate;
    agent.value_optimizer.learning_rate = config.value_learning_rate;
    let mut reports = Vec::with_capacity(config.epochs);
    let mut frozen: Option<Vec<Option<f64>>> = None;
    for epoch in 0..config.epochs {
        let mut table = ValueTable::evaluate(buffer, &agent.value)?;
        if config.freeze_bootstrap {
            match &frozen {
                Some(b) => table.bootstrap = b.clone(),
                None => frozen = Some(table.bootstrap.clone()),
            }
        }
        let (targets, adv) = targets_and_advantages(buffer, &config.targets, &table, config.normalize_advantages)?;
        let g = ppo_gradients(
            buffer,
            &agent.policy,
            &agent.value,
            &adv,
            &targets,
            config.clip,
            config.entropy_coef,
        )?;
        if !g.loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        non_finite_check(&g.policy)?;
        non_finite_check(&g.value)?;
        let over_kl = epoch > 0 && config.kl_ceiling.is_some_and(|c| g.report.approx_kl > c);
        reports.push(g.report);
        if over_kl {
            break;
        }
        agent
            .policy_optimizer
            .step(agent.policy.params_mut().values_mut(), &g.policy)?;
        agent
            .value_optimizer
            .step(agent.value.params_mut().values_mut(), &g.value)?;
    }
    Ok(reports)
}

/// Runs the configured number of epochs over one buffer, one Adam step per
/// epoch on θ and φ. Targets and advantages are recomputed every epoch; log
/// π_old stays at the values recorded during collection. On any error the
/// agent, including optimizer state, is restored to what it was on entry.
pub fn ppo_update(buffer: &TrajectoryBuffer, agent: &mut Agent, config: &PpoConfig) -> Result<Vec<UpdateReport>> {
    config.validate()?;
    ensure_nonempty(buffer)?;
    if buffer.gamma() != config.gamma {
        return Err(Error::invalid(alloc::format!(
            "buffer discount {} differs from configured {}",
            buffer.gamma(),
            config.gamma
        )));
    }
    let scaled;
    let buffer = if config.reward_scale == 1.0 {
        buffer
    } else {
        let mut b = buffer.clone();
        b.transitions_mut()
            .iter_mut()
            .for_each(|t| t.reward *= config.reward_scale);
        scaled = b;
        &scaled
    };
    let snapshot = agent.clone();
    let out = ppo_epochs(buffer, agent, config);
    if out.is_err() {
        *agent = snapshot;
    }
    out
}
