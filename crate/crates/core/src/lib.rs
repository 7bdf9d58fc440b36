//! Tensor-train tooling for privacy-preserving release of clinical
//! classifiers: training, tensorization, membership-inference auditing,
//! differential-privacy baselines and interpretability.

pub mod cohorts;
pub mod data;
pub mod defenses;
pub mod error;
pub mod harness;
pub mod interpret;
pub mod linalg;
pub mod nn;
pub mod predictors;
pub mod privacy;
pub mod seed;
pub mod standardize;
pub mod stats;
pub mod tensorize;
pub mod tt;

pub use error::{Error, Result};
