//! Orchestration behind the `ptq` binary. Each command reads a survey CSV,
//! runs one stage of the analysis and writes JSON reports plus plot-ready
//! CSV files into an output directory.

pub mod commands;
pub mod config;
pub mod error;
mod output;

pub use config::{Metric, RunConfig};
pub use error::CliError;
