//! End-to-end taxonomy induction with policy-gradient reinforcement learning.
//!
//! A policy network repeatedly picks a remaining term and a term already on
//! the tree, attaching the first below the second. Term pairs are encoded
//! from dependency paths, word embeddings and binned surface/frequency
//! features; training uses REINFORCE on an Edge-F1-shaped reward.
//!
//! Modules, bottom-up:
//! - [`taxo`]: trees, ancestor/edge metrics, Chu-Liu/Edmonds baseline
//! - [`data`]: loaders, writers and the synthetic dataset generator
//! - [`features`]: surface, frequency and generality pair features
//! - [`autodiff`]: tape-based reverse-mode differentiation and Adam
//! - [`encoder`]: path LSTM and term-pair representations
//! - [`env`]: the taxonomy construction environment
//! - [`policy`]: action scoring
//! - [`trainer`]: REINFORCE, evaluation, checkpoints
//! - [`pairwise`]: the pairwise hypernym classifier feeding the MST baseline

pub mod autodiff;
pub mod data;
pub mod encoder;
pub mod env;
pub mod features;
pub mod pairwise;
pub mod policy;
pub mod taxo;
pub mod trainer;

mod error;

pub use error::{Error, Result};
