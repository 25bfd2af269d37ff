//! Loan default modelling from structured features and assessment text.
//!
//! The crate covers the full desk-scale pipeline: synthetic data generation,
//! text vectorization (TF-IDF, latent concepts, token sequences), linear and
//! forest baselines, small neural models with a fusion head, evaluation
//! metrics and report grids, and post-hoc explanation tooling.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod model_io;
pub mod neural;
pub mod seed;
pub mod text;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
