//! File formats, subcommands and the command-line front end for the
//! prooflens pipeline. The algorithms live in `prooflens-core`.

pub mod cli;
pub mod commands;
mod error;
pub mod formats;
pub mod report;

pub use cli::run_cli;
pub use error::{CliError, Result};
