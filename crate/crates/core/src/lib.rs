//! Privacy risk measurement for trajectory datasets.
//!
//! Trajectories are matched against equivalence areas by their origin
//! (quasi-identifier) and destination (sensitive attribute). From those
//! matches the crate derives k-anonymity, strict k-anonymity, l-diversity and
//! t-closeness per area and per trajectory, and can re-measure them after a
//! Gaussian spatio-temporal perturbation.

pub mod anonymize;
pub mod cli;
pub mod areas;
pub mod error;
pub mod filter;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod report;
mod numfmt;

pub use error::{Error, Result};
