//! Learning a low-rank Mahalanobis metric from perceptual adjustment queries.
//!
//! The crate simulates slider-style responses under an inverted measurement
//! model, runs the averaging/truncation pipeline, fits the nuclear-norm
//! regularized PSD estimator, and compares against ordinal-query baselines.

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod oracles;
pub mod pipeline;

pub use error::{Error, Result};
