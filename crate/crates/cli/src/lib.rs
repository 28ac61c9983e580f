//! Command-line companion to `pgrad-core`: run configuration, checkpoints,
//! metrics, transition dumps, verification suites and learning-curve plots.

pub mod checkpoint;
pub mod config;
pub mod dump;
pub mod eval;
pub mod mdp_io;
pub mod metrics;
pub mod plot;
pub mod train;
pub mod verify;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
