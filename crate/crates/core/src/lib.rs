//! Model-free actor-critic reinforcement learning on a scalar reverse-mode tape.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: file formats, the command line and persistence live in the
//! `pgrad-cli` companion crate.
//!
//! Module map:
//!
//! * [`autodiff`]: scalar tape, MLPs over flat parameter vectors, Adam, finite differences.
//! * [`policy`]: Gaussian and categorical policy heads and the value head.
//! * [`returns`]: transitions, trajectory buffers, K-step targets, advantages, value loss.
//! * [`algos`]: REINFORCE, advantage actor-critic and clipped PPO updates.
//! * [`envs`]: environment trait, rollout collector and the reference environments.
//! * [`oracle`]: exact evaluation of small tabular MDPs.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algos;
pub mod autodiff;
pub mod envs;
mod error;
pub(crate) mod math;
pub mod oracle;
pub mod policy;
pub mod returns;

pub use algos::{Agent, PpoConfig, UpdateReport};
pub use envs::{AnyEnv, Collector, EnvSpec, Environment};
pub use error::{Error, Result};
pub use oracle::{TabularMdp, TabularPolicy};

pub use autodiff::{Activation, Adam, Architecture, Layout, Mlp, ParamVector, Tape, Var};

pub use policy::{Action, ActionDistribution, CategoricalPolicy, GaussianPolicy, Policy, ValueFunction};
pub use returns::{TerminationKind, TrajectoryBuffer, Transition};
