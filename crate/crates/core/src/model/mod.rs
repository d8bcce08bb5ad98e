//! The Q-network: semantic and depth conv encoders, a bidirectional GRU
//! instruction encoder, visually conditioned attention over token outputs
//! and a small Q head.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, fnv1a64, load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{ArchitectureConfig, DEFAULT_PARAM_COUNT};
pub use network::{greedy_action, AttentionVars, FollowNet, ForwardTrace, ForwardVars, InstructionEncoding};

use crate::autodiff::{AutodiffError, ParameterSet, Tape, Var};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Anything that maps an observation to one Q-value per action on a tape.
pub trait QNetwork<O>: Sync {
    fn num_actions(&self) -> usize;

    fn q_forward(&self, tape: &mut Tape<'_>, obs: &O) -> Result<Var, ModelError>;

    fn q_eval(&self, params: &ParameterSet, obs: &O) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new(params);
        let q = self.q_forward(&mut tape, obs)?;
        Ok(tape.value(q).to_vec())
    }
}
