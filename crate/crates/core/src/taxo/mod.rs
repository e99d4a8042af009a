//! Taxonomy trees, tree metrics, and the arborescence baseline.

mod arborescence;
mod metrics;
mod tree;

pub use arborescence::{max_arborescence, total_weight, two_phase_baseline, BaselineConfig};
pub use metrics::{evaluate, f1, prf, MetricReport};
pub use tree::{Taxonomy, Term, TermId};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxoError {
    #[error("cycle through node {0}")]
    Cycle(TermId),
    #[error("multiple roots: {0:?}")]
    MultipleRoots(Vec<TermId>),
    #[error("node {0} has more than one parent")]
    MultipleParents(TermId),
    #[error("node {0} is not in the tree")]
    UnknownNode(TermId),
    #[error("node {0} is already in the tree")]
    AlreadyPresent(TermId),
    #[error("tree already has a root")]
    RootAlreadySet,
    #[error("tree is empty")]
    Empty,
    #[error("gold taxonomy is empty")]
    EmptyGold,
    #[error("no arborescence exists: node {0} is unreachable from the root")]
    Infeasible(TermId),
    #[error("arc ({0}, {1}) has a non-finite weight")]
    NonFiniteWeight(TermId, TermId),
}
