//! Reverse-mode differentiation over scalar graphs, plus the pieces built
//! on it: MLPs over flat parameter vectors, Adam and a finite-difference
//! oracle for checking gradients.

mod gradcheck;
mod mlp;
mod optim;
mod params;
mod tape;

pub use gradcheck::{finite_diff_grad, max_relative_error};
pub use mlp::{Activation, Architecture, Mlp};
pub use optim::{gradient_step, Adam};
pub use params::{Block, Layout, ParamIndex, ParamVector};
pub use tape::{Tape, Var};
