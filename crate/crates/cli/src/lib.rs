//! Configuration-driven driver for MC-gPC swarming experiments.
//!
//! The binary `mcgpc` is a thin wrapper around [`commands`]; everything is
//! also usable as a library, which is how the integration tests drive it.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    convergence_sweep, final_temperature, oracle_final_temperature, parse_sweep, run_convergence, run_experiment,
    run_oracle, with_threads, Overrides, SweepAxis, SweepRow, SWEEP_HEADER,
};
pub use config::{Config, Experiment};
pub use error::{CliError, Result};
