//! File formats, run directories and the `mflimit` command-line runner on
//! top of `mflimit-core`.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod idx;
pub mod pool;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
