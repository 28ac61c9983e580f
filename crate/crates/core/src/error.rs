use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch at layer {layer}: expected {expected}, got {actual}")]
    Shape {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("parameter vector has {actual} entries but the layout needs {expected}")]
    ParamCount { expected: usize, actual: usize },
    #[error("length mismatch: {what} ({left} vs {right})")]
    Length {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("backward() needs a scalar root, got {0} outputs")]
    NonScalarRoot(usize),
    #[error("gradient accumulators hold a previous sweep; call zero_grad() first")]
    StaleAccumulators,
    #[error("variable belongs to a different tape")]
    ForeignVar,
    #[error("non-finite function value at coordinate {0}")]
    NonFiniteEvaluation(usize),
    #[error("non-finite gradient entries at {0:?}")]
    NonFiniteGradient(Vec<usize>),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("action {action} out of range for {count} discrete actions")]
    ActionOutOfRange { action: usize, count: usize },
    #[error("action kind does not match the policy or environment")]
    ActionKind,
    #[error("discount {0} outside [0, 1)")]
    Discount(f64),
    #[error("index {index} outside buffer of length {len}")]
    OutOfBuffer { index: usize, len: usize },
    #[error("transition {0} ends a bootstrapped block but carries no final observation")]
    MissingBootstrapObservation(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("non-finite {what} at episode {episode}, step {step}")]
    EnvNonFinite {
        what: &'static str,
        episode: u64,
        step: u64,
    },
    #[error("enumeration needs {needed} terms, above the cap of {cap}")]
    EnumerationCap { needed: u128, cap: u128 },
    #[error("singular linear system")]
    Singular,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
