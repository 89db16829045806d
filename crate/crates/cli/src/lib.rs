//! Command-line experiment runner for the `inscat_core` reconstruction library.
//!
//! A run is described by a `key = value` config file (see [`config::SCHEMA`]
//! for every key and its default) and produces a directory of array files,
//! graymaps, a metrics record and a manifest that reproduces it exactly.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod pipeline;
pub mod render;

pub use config::{ConfigTable, ExperimentConfig};
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, sweep, RunReport, SweepAxis};
