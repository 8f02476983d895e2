//! File formats, run configuration, feature export and benchmarks for the
//! `fcd` command-line tool.

pub mod artifacts;
pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod features;
pub mod ingest;
pub mod synthetic;

pub use error::{CliError, Result};
