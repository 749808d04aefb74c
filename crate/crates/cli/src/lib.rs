//! Command-line driver: scenario configs, sweeps, analysis tables and CSV.

pub mod analyze;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod selftest;

pub use error::{CliError, Result};

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "CHORDREP_WORKERS";
