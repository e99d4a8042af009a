//! Minimal reverse-mode differentiation over dense `f64` tensors, plus Adam.
//!
//! Parameters live in a [`ParamStore`]. A [`Tape`] borrows the store
//! immutably, records a dynamic graph, and its `backward` returns
//! [`Gradients`] that the caller folds back into the store. Several tapes
//! can therefore read one parameter snapshot at the same time.

mod adam;
mod param;
mod tape;

pub use adam::Adam;
pub use param::{Gradients, ParamId, ParamStore, Parameter, Tensor};
pub use tape::{Axis, NodeId, Tape};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0} needs at least one input")]
    Empty(&'static str),
}
