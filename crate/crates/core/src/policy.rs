//! Stochastic policy heads and the state-value head.
//!
//! Every head has two evaluation paths: a plain `f64` path used while
//! collecting experience, and a tape path ([`PolicyGraph`], [`ValueGraph`])
//! that yields differentiable log-probabilities, entropies and values.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Architecture, Block, Layout, Mlp, ParamVector, Tape, Var};
use crate::math::{self, LN_2PI};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn as_continuous(&self) -> Result<&[f64]> {
        match self {
            Action::Continuous(a) => Ok(a),
            Action::Discrete(_) => Err(Error::ActionKind),
        }
    }

    pub fn as_discrete(&self) -> Result<usize> {
        match self {
            Action::Discrete(a) => Ok(*a),
            Action::Continuous(_) => Err(Error::ActionKind),
        }
    }
}

/// Whether the Gaussian's log-σ is a free parameter vector or a second
/// network head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdMode {
    #[default]
    StateIndependent,
    StateDependent,
}

/// A concrete action distribution for one observation.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
    Categorical { logits: Vec<f64> },
}

/// Numerically shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| math::exp(l - m)).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + math::ln(logits.iter().map(|&l| math::exp(l - m)).sum::<f64>());
    logits.iter().map(|&l| l - lse).collect()
}

impl ActionDistribution {
    pub fn log_prob(&self, action: &Action) -> Result<f64> {
        match self {
            ActionDistribution::Gaussian { mean, log_std } => {
                let a = action.as_continuous()?;
                if a.len() != mean.len() {
                    return Err(Error::Length {
                        what: "action/mean",
                        left: a.len(),
                        right: mean.len(),
                    });
                }
                Ok(a.iter()
                    .zip(mean)
                    .zip(log_std)
                    .map(|((&a, &mu), &ls)| {
                        let z = (a - mu) * math::exp(-ls);
                        -0.5 * z * z - ls - 0.5 * LN_2PI
                    })
                    .sum())
            }
            ActionDistribution::Categorical { logits } => {
                let a = action.as_discrete()?;
                if a >= logits.len() {
                    return Err(Error::ActionOutOfRange {
                        action: a,
                        count: logits.len(),
                    });
                }
                Ok(log_softmax(logits)[a])
            }
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDistribution::Gaussian { log_std, .. } => log_std.iter().map(|ls| 0.5 * (LN_2PI + 1.0) + ls).sum(),
            ActionDistribution::Categorical { logits } => {
                let lp = log_softmax(logits);
                -lp.iter().map(|&l| math::exp(l) * l).sum::<f64>()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, log_std } => Action::Continuous(
                mean.iter()
                    .zip(log_std)
                    .map(|(&mu, &ls)| {
                        let z: f64 = StandardNormal.sample(rng);
                        mu + math::exp(ls) * z
                    })
                    .collect(),
            ),
            ActionDistribution::Categorical { logits } => {
                let probs = softmax(logits);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return Action::Discrete(i);
                    }
                }
                Action::Discrete(probs.len() - 1)
            }
        }
    }

    /// Most likely action: the mean, or the arg-max logit.
    pub fn mode(&self) -> Action {
        match self {
            ActionDistribution::Gaussian { mean, .. } => Action::Continuous(mean.clone()),
            ActionDistribution::Categorical { logits } => {
                let mut best = 0;
                for (i, l) in logits.iter().enumerate() {
                    if *l > logits[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
        }
    }
}

/// Diagonal Gaussian policy with a network mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    mlp: Mlp,
    params: ParamVector,
    action_dim: usize,
    std_mode: StdMode,
}

impl GaussianPolicy {
    /// Network `obs_dim → hidden… → action_dim` (or `2·action_dim` with a
    /// state-dependent σ). Log-σ starts at 0.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        std_mode: StdMode,
        rng: &mut R,
    ) -> Result<Self> {
        let outputs = match std_mode {
            StdMode::StateIndependent => action_dim,
            StdMode::StateDependent => 2 * action_dim,
        };
        let mlp = Mlp::new(Architecture::new(obs_dim, hidden, outputs))?;
        let mut blocks = mlp.architecture().blocks();
        if std_mode == StdMode::StateIndependent {
            blocks.push(Block::Vector { len: action_dim });
        }
        let mut params = ParamVector::zeros(Layout::new(blocks));
        mlp.init(&mut params, rng)?;
        Ok(GaussianPolicy {
            mlp,
            params,
            action_dim,
            std_mode,
        })
    }

    pub fn from_params(arch: Architecture, params: ParamVector, action_dim: usize, std_mode: StdMode) -> Result<Self> {
        let mlp = Mlp::new(arch)?;
        mlp.check_layout(params.layout())?;
        let want_out = match std_mode {
            StdMode::StateIndependent => action_dim,
            StdMode::StateDependent => 2 * action_dim,
        };
        let arch = mlp.architecture();
        if arch.output_dim() != want_out {
            return Err(Error::Shape {
                layer: arch.layer_sizes.len() - 2,
                expected: want_out,
                actual: arch.output_dim(),
            });
        }
        let extra = params.len() - arch.param_count();
        let want_extra = if std_mode == StdMode::StateIndependent {
            action_dim
        } else {
            0
        };
        if extra != want_extra {
            return Err(Error::ParamCount {
                expected: arch.param_count() + want_extra,
                actual: params.len(),
            });
        }
        Ok(GaussianPolicy {
            mlp,
            params,
            action_dim,
            std_mode,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn std_mode(&self) -> StdMode {
        self.std_mode
    }

    fn log_std_offset(&self) -> usize {
        self.mlp.architecture().param_count()
    }

    /// Sets every state-independent log-σ entry.
    pub fn set_log_std(&mut self, value: f64) {
        if self.std_mode == StdMode::StateIndependent {
            let at = self.log_std_offset();
            self.params.values_mut()[at..].iter_mut().for_each(|v| *v = value);
        }
    }

    fn distribution(&self, obs: &[f64]) -> Result<ActionDistribution> {
        let out = self.mlp.eval(self.params.values(), obs)?;
        let n = self.action_dim;
        let (mean, log_std) = match self.std_mode {
            StdMode::StateIndependent => (out, self.params.values()[self.log_std_offset()..].to_vec()),
            StdMode::StateDependent => (out[..n].to_vec(), out[n..].to_vec()),
        };
        if !math::is_finite_slice(&mean) || !math::is_finite_slice(&log_std) {
            return Err(Error::NonFinite("policy output"));
        }
        Ok(ActionDistribution::Gaussian { mean, log_std })
    }
}

/// Softmax policy over a finite action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalPolicy {
    mlp: Mlp,
    params: ParamVector,
    n_actions: usize,
}

impl CategoricalPolicy {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], n_actions: usize, rng: &mut R) -> Result<Self> {
        let mlp = Mlp::new(Architecture::new(obs_dim, hidden, n_actions))?;
        let mut params = ParamVector::zeros(mlp.layout());
        mlp.init(&mut params, rng)?;
        Ok(CategoricalPolicy { mlp, params, n_actions })
    }

    pub fn from_params(arch: Architecture, params: ParamVector) -> Result<Self> {
        let mlp = Mlp::new(arch)?;
        mlp.check_layout(params.layout())?;
        if params.len() != mlp.architecture().param_count() {
            return Err(Error::ParamCount {
                expected: mlp.architecture().param_count(),
                actual: params.len(),
            });
        }
        let n_actions = mlp.architecture().output_dim();
        Ok(CategoricalPolicy { mlp, params, n_actions })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let logits = self.mlp.eval(self.params.values(), obs)?;
        if !math::is_finite_slice(&logits) {
            return Err(Error::NonFinite("policy output"));
        }
        Ok(logits)
    }

    pub fn probabilities(&self, obs: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(obs)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Gaussian(GaussianPolicy),
    Categorical(CategoricalPolicy),
}

impl From<GaussianPolicy> for Policy {
    fn from(p: GaussianPolicy) -> Self {
        Policy::Gaussian(p)
    }
}

impl From<CategoricalPolicy> for Policy {
    fn from(p: CategoricalPolicy) -> Self {
        Policy::Categorical(p)
    }
}

impl Policy {
    fn mlp(&self) -> &Mlp {
        match self {
            Policy::Gaussian(p) => &p.mlp,
            Policy::Categorical(p) => &p.mlp,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.mlp().architecture().input_dim()
    }

    pub fn architecture(&self) -> &Architecture {
        self.mlp().architecture()
    }

    pub fn params(&self) -> &ParamVector {
        match self {
            Policy::Gaussian(p) => &p.params,
            Policy::Categorical(p) => &p.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        match self {
            Policy::Gaussian(p) => &mut p.params,
            Policy::Categorical(p) => &mut p.params,
        }
    }

    pub fn distribution(&self, obs: &[f64]) -> Result<ActionDistribution> {
        match self {
            Policy::Gaussian(p) => p.distribution(obs),
            Policy::Categorical(p) => Ok(ActionDistribution::Categorical { logits: p.logits(obs)? }),
        }
    }

    /// Draws an action and returns it with its log-probability. Gaussian
    /// samples are not squashed or clamped.
    pub fn sample_action<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Action, f64)> {
        let dist = self.distribution(obs)?;
        let action = dist.sample(rng);
        let log_prob = dist.log_prob(&action)?;
        Ok((action, log_prob))
    }

    pub fn log_prob_value(&self, obs: &[f64], action: &Action) -> Result<f64> {
        self.distribution(obs)?.log_prob(action)
    }

    /// Registers θ on `tape` for differentiable evaluation.
    pub fn bind<'p, 't>(&'p self, tape: &'t Tape) -> PolicyGraph<'p, 't> {
        PolicyGraph {
            policy: self,
            tape,
            params: tape.vars(self.params().values()),
        }
    }
}

/// A policy whose parameters are leaves on a tape.
pub struct PolicyGraph<'p, 't> {
    policy: &'p Policy,
    tape: &'t Tape,
    params: Vec<Var<'t>>,
}

impl<'p, 't> PolicyGraph<'p, 't> {
    pub fn params(&self) -> &[Var<'t>] {
        &self.params
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn gaussian_heads(&self, p: &GaussianPolicy, obs: &[f64]) -> Result<(Vec<Var<'t>>, Vec<Var<'t>>)> {
        let out = p.mlp.forward(self.tape, &self.params, obs)?;
        let n = p.action_dim;
        let heads = match p.std_mode {
            StdMode::StateIndependent => (out, self.params[p.log_std_offset()..].to_vec()),
            StdMode::StateDependent => (out[..n].to_vec(), out[n..].to_vec()),
        };
        if heads.0.iter().chain(&heads.1).any(|v| !v.value().is_finite()) {
            return Err(Error::NonFinite("policy output"));
        }
        Ok(heads)
    }

    fn log_softmax(&self, logits: &[Var<'t>]) -> Vec<Var<'t>> {
        // the shift is a constant; log-softmax is invariant to it
        let m = logits.iter().map(|l| l.value()).fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<Var<'t>> = logits.iter().map(|&l| l - m).collect();
        let exps: Vec<Var<'t>> = shifted.iter().map(|s| s.exp()).collect();
        let lse = self.tape.sum(&exps).ln();
        shifted.into_iter().map(|s| s - lse).collect()
    }

    fn logits(&self, p: &CategoricalPolicy, obs: &[f64]) -> Result<Vec<Var<'t>>> {
        let logits = p.mlp.forward(self.tape, &self.params, obs)?;
        if logits.iter().any(|v| !v.value().is_finite()) {
            return Err(Error::NonFinite("policy output"));
        }
        Ok(logits)
    }

    /// Differentiable log π_θ(action | obs).
    pub fn log_prob(&self, obs: &[f64], action: &Action) -> Result<Var<'t>> {
        match self.policy {
            Policy::Gaussian(p) => {
                let a = action.as_continuous()?;
                if a.len() != p.action_dim {
                    return Err(Error::Length {
                        what: "action/mean",
                        left: a.len(),
                        right: p.action_dim,
                    });
                }
                let (mean, log_std) = self.gaussian_heads(p, obs)?;
                let terms: Vec<Var<'t>> = a
                    .iter()
                    .zip(&mean)
                    .zip(&log_std)
                    .map(|((&a, &mu), &ls)| {
                        let z = (a - mu) * (-ls).exp();
                        z.square() * -0.5 - ls - 0.5 * LN_2PI
                    })
                    .collect();
                Ok(self.tape.sum(&terms))
            }
            Policy::Categorical(p) => {
                let a = action.as_discrete()?;
                if a >= p.n_actions {
                    return Err(Error::ActionOutOfRange {
                        action: a,
                        count: p.n_actions,
                    });
                }
                let logits = self.logits(p, obs)?;
                Ok(self.log_softmax(&logits)[a])
            }
        }
    }

    /// log π_θ(action | obs) and the entropy of π_θ(· | obs) from one forward pass.
    pub fn log_prob_and_entropy(&self, obs: &[f64], action: &Action) -> Result<(Var<'t>, Var<'t>)> {
        match self.policy {
            Policy::Gaussian(p) => {
                let a = action.as_continuous()?;
                if a.len() != p.action_dim {
                    return Err(Error::Length {
                        what: "action/mean",
                        left: a.len(),
                        right: p.action_dim,
                    });
                }
                let (mean, log_std) = self.gaussian_heads(p, obs)?;
                let terms: Vec<Var<'t>> = a
                    .iter()
                    .zip(&mean)
                    .zip(&log_std)
                    .map(|((&a, &mu), &ls)| {
                        let z = (a - mu) * (-ls).exp();
                        z.square() * -0.5 - ls - 0.5 * LN_2PI
                    })
                    .collect();
                let n = log_std.len() as f64;
                let entropy = self.tape.sum(&log_std) + n * 0.5 * (LN_2PI + 1.0);
                Ok((self.tape.sum(&terms), entropy))
            }
            Policy::Categorical(p) => {
                let a = action.as_discrete()?;
                if a >= p.n_actions {
                    return Err(Error::ActionOutOfRange {
                        action: a,
                        count: p.n_actions,
                    });
                }
                let logits = self.logits(p, obs)?;
                let lp = self.log_softmax(&logits);
                let terms: Vec<Var<'t>> = lp.iter().map(|&l| l.exp() * l).collect();
                Ok((lp[a], -self.tape.sum(&terms)))
            }
        }
    }

    /// Differentiable analytic entropy of π_θ(· | obs).
    pub fn entropy(&self, obs: &[f64]) -> Result<Var<'t>> {
        match self.policy {
            Policy::Gaussian(p) => {
                let (_, log_std) = self.gaussian_heads(p, obs)?;
                let n = log_std.len() as f64;
                Ok(self.tape.sum(&log_std) + n * 0.5 * (LN_2PI + 1.0))
            }
            Policy::Categorical(p) => {
                let logits = self.logits(p, obs)?;
                let lp = self.log_softmax(&logits);
                let terms: Vec<Var<'t>> = lp.iter().map(|&l| l.exp() * l).collect();
                Ok(-self.tape.sum(&terms))
            }
        }
    }
}

/// State-value network V_φ(o).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    mlp: Mlp,
    params: ParamVector,
}

impl ValueFunction {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mlp = Mlp::new(Architecture::new(obs_dim, hidden, 1))?;
        let mut params = ParamVector::zeros(mlp.layout());
        mlp.init(&mut params, rng)?;
        Ok(ValueFunction { mlp, params })
    }

    /// All-zero network, which predicts 0 everywhere.
    pub fn zeros(obs_dim: usize, hidden: &[usize]) -> Result<Self> {
        let mlp = Mlp::new(Architecture::new(obs_dim, hidden, 1))?;
        let params = ParamVector::zeros(mlp.layout());
        Ok(ValueFunction { mlp, params })
    }

    pub fn from_params(arch: Architecture, params: ParamVector) -> Result<Self> {
        let mlp = Mlp::new(arch)?;
        if mlp.architecture().output_dim() != 1 {
            return Err(Error::Shape {
                layer: mlp.architecture().layer_sizes.len() - 2,
                expected: 1,
                actual: mlp.architecture().output_dim(),
            });
        }
        mlp.check_layout(params.layout())?;
        Ok(ValueFunction { mlp, params })
    }

    pub fn obs_dim(&self) -> usize {
        self.mlp.architecture().input_dim()
    }

    pub fn architecture(&self) -> &Architecture {
        self.mlp.architecture()
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn value(&self, obs: &[f64]) -> Result<f64> {
        let v = self.mlp.eval(self.params.values(), obs)?[0];
        if !v.is_finite() {
            return Err(Error::NonFinite("value output"));
        }
        Ok(v)
    }

    pub fn bind<'p, 't>(&'p self, tape: &'t Tape) -> ValueGraph<'p, 't> {
        ValueGraph {
            vf: self,
            tape,
            params: tape.vars(self.params.values()),
        }
    }
}

pub struct ValueGraph<'p, 't> {
    vf: &'p ValueFunction,
    tape: &'t Tape,
    params: Vec<Var<'t>>,
}

impl<'p, 't> ValueGraph<'p, 't> {
    pub fn params(&self) -> &[Var<'t>] {
        &self.params
    }

    /// Differentiable V_φ(obs).
    pub fn value(&self, obs: &[f64]) -> Result<Var<'t>> {
        let out = self.vf.mlp.forward(self.tape, &self.params, obs)?;
        let v = out[0];
        if !v.value().is_finite() {
            return Err(Error::NonFinite("value output"));
        }
        Ok(v)
    }
}

/// Uniform logits (all zero) over `n` actions from a zeroed linear head.
pub fn uniform_categorical(obs_dim: usize, n_actions: usize) -> Result<CategoricalPolicy> {
    let arch = Architecture::new(obs_dim, &[], n_actions);
    let layout = Layout::new(arch.blocks());
    CategoricalPolicy::from_params(arch, ParamVector::zeros(layout))
}

/// A Gaussian whose mean head is zeroed, with every log-σ set to `log_std`.
pub fn zero_mean_gaussian(obs_dim: usize, action_dim: usize, log_std: f64) -> Result<GaussianPolicy> {
    let arch = Architecture::new(obs_dim, &[], action_dim);
    let mut blocks = arch.blocks();
    blocks.push(Block::Vector { len: action_dim });
    let params = ParamVector::zeros(Layout::new(blocks));
    let mut p = GaussianPolicy::from_params(arch, params, action_dim, StdMode::StateIndependent)?;
    p.set_log_std(log_std);
    Ok(p)
}
