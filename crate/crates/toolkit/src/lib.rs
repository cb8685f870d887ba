//! File formats, ingestion and experiment orchestration on top of
//! [`pair_core`].
//!
//! The `pair` binary in this crate exposes the `simulate`, `adjust`, `train`,
//! `evaluate`, `sweep` and `report` subcommands.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod ingest;
pub mod report;

pub use error::{Error, Result};
