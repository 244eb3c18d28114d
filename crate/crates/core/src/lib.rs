//! Causal structure learning for dependent mixed continuous/ordinal data.
//!
//! Units may be correlated within blocks. Discrete columns are modelled as
//! quantized latent Gaussians; the pipeline estimates thresholds and a
//! block-diagonal unit covariance, de-correlates the latent data and then
//! runs ordinary i.i.d. structure learners on the result.

pub mod commands;
pub mod config;
pub mod covest;
pub mod decorrelate;
pub mod error;
pub mod evaluate;
pub mod graphs;
pub mod io;
pub mod learn;
pub mod mathcore;
pub mod model;
pub mod pipeline;
pub mod preestimate;
pub mod preprocess;
pub mod reproduce;
pub mod rng;
pub mod simulate;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
