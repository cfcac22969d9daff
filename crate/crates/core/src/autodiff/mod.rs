//! Dense tensors with reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as an appended node; calling
//! [`Graph::backward`] on a scalar node sweeps the record in reverse and
//! yields [`Gradients`] for every node. All arithmetic is `f64`, and every
//! op rejects non-finite results.

mod check;
mod graph;
mod tensor;

use alloc::vec::Vec;

pub use check::{
    check_problem, grad_check, relative_error, Differentiable, GradCheckReport, ParamCheck,
    REL_ERROR_FLOOR,
};
pub use graph::{Gradients, Graph, NodeId};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("invalid shape {shape:?}: rank must be non-zero and dims positive")]
    InvalidShape { shape: Vec<usize> },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: unsupported rank for shape {shape:?}")]
    Rank { op: &'static str, shape: Vec<usize> },
    #[error("{op}: axis {axis} out of range for shape {shape:?}")]
    Axis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: index {index} out of range (bound {bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: non-finite result")]
    NonFinite { op: &'static str },
    #[error("backward: loss must be scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
}
