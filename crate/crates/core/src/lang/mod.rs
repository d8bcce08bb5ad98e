//! Instruction text: vocabulary, templated generation, dataset files and
//! train/hold-out splitting.

mod dataset;
mod generate;
mod split;
mod vocab;

pub use dataset::{Houses, Instruction, InstructionDataset, InstructionRecord, Split};
pub use generate::{generate_instruction, natural_waypoints, sample_waypoints, trace_route, Segment, Turn};
pub use split::split_dataset;
pub use vocab::{build_vocab, detokenize, split_words, tokenize, TokenId, Vocabulary, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LangError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid instructions: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("split failed: {0}")]
    Split(String),
    #[error("{0}")]
    Io(String),
}
