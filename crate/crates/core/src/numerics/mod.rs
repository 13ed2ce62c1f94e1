//! Dense `f64` arrays, a small reverse-mode tape, GRU and attention kernels,
//! optimizers and a finite-difference gradient checker.

mod array;
mod gradcheck;
mod kernels;
mod optim;
mod params;
mod tape;

pub use array::{cross_entropy, log_softmax, softmax, DenseArray};
pub use gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
pub use kernels::{attention, gru_cell, GruParameters};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{Gradients, ParamId, ParameterStore};
pub use tape::{Graph, Var};

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target {0} has zero probability")]
    ZeroProbabilityTarget(usize),
    #[error("attention needs at least one key")]
    EmptyKeys,
    #[error("duplicate parameter name {0:?}")]
    DuplicateParameter(String),
    #[error("missing parameter {0:?}")]
    MissingParameter(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
