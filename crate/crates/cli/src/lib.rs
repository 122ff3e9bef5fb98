//! Configuration parsing, dispatch and output for the `thermo` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod emit;
pub mod run;

pub use config::{parse_config, Command, ConfigError, ExperimentConfig, Format};
pub use run::{execute, run, Outcome, RunError};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "THERMO_THREADS";
