//! Training feature embeddings with pairwise cosine losses guided by label and
//! explanation similarity, multi-task label/explanation prediction, and
//! Gaussian-kernel-weighted k-nearest-neighbor inference of both labels and
//! explanations, plus the evaluation-metric suite and an experiment runner.
//!
//! The crate is organized around a small set of modules:
//!
//! - [`dataset`]: load, transform, select, split, and synthesize (X, Y, E) data.
//! - [`network`]: dense feed-forward networks with exact analytic gradients;
//!   the last hidden layer doubles as the embedding map.
//! - [`pairloss`]: pairwise cosine-embedding losses, neighbor relations, and
//!   pair sampling.
//! - [`knn`]: exact embedding-space nearest-neighbor inference with Gaussian
//!   kernel weighting.
//! - [`metrics`]: discretization, MAE, 0-1 accuracy, and l1 explanation
//!   distances.
//! - [`experiment`]: config-driven orchestration of the experimental arms,
//!   each behind the [`experiment::arms::Arm`] trait and selected by name.
//! - [`oracle`]: independent brute-force reference implementations used by
//!   tests and the `gradcheck` subcommand.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod knn;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod pairloss;

pub use error::{Error, Result};
