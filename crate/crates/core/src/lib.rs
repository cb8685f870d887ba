//! Core algorithms for rebalancing annotation pools toward a target
//! population.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and an explicit seed; file formats, ingestion and
//! experiment orchestration live in the `pair-toolkit` crate.
//!
//! * [`simulation`] builds gold tables, biased annotation pools and the four
//!   training-set recipes.
//! * [`pair`] computes post-stratification weights and materializes the
//!   replicated pseudo-population.
//! * [`trainer`] is a hashed bag-of-words logistic regression trained on
//!   individual annotation records.
//! * [`metrics`] holds absolute calibration bias, F1 and seed aggregation.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod metrics;
pub mod pair;
pub mod rng;
pub mod simulation;
pub mod split;
pub mod trainer;

pub use error::{Error, Result};
