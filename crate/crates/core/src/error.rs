use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::data::DataError;
use crate::taxo::TaxoError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Taxo(#[from] TaxoError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    /// Operation not valid in the current state.
    #[error("invalid state: {0}")]
    State(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("checkpoint format mismatch: {0}")]
    Version(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
