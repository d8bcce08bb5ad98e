//! Minimal reverse-mode automatic differentiation over `f64` tensors.
//!
//! Operations are recorded at layer granularity (dense, conv, softmax, ...)
//! on a [`Tape`] that borrows a [`ParameterSet`]; [`Tape::backward`] returns
//! per-parameter [`Gradients`] which callers accumulate and apply with
//! [`sgd_update`] or [`Sgd`].

mod gradcheck;
pub mod layers;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use layers::{conv2d, dense, gru_cell, softmax, GruWeights};
pub use tape::{sigmoid, softmax_values, Activation, ConvGeometry, Tape, Var};
pub use tensor::{sgd_update, Gradients, ParameterSet, Sgd, Tensor};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("parameter `{0}` has no accumulated gradient")]
    MissingGradient(String),
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}
