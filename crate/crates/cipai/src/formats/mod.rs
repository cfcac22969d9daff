//! On-disk formats: tensors, checkpoints, vocabularies, pairs, vectors,
//! traces, training logs and evaluation results.

mod checkpoint;
mod tables;
mod tensor;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use tables::{
    format_float, parse_pairs, parse_vectors, parse_vocab, render_grad_report, render_log_line,
    render_pairs, render_results, render_trace, render_vectors, render_vocab, vectors_to_embedding,
    VectorRows,
};
pub use tensor::{read_tensor, write_tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("unexpected end of data while reading {what}")]
    Truncated { what: &'static str },
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("checksum mismatch: file is corrupt")]
    Checksum,
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("tensor: {0}")]
    Tensor(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model: {0}")]
    Model(#[from] cipai_core::seq2seq::ModelError),
}

impl FormatError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }
}
