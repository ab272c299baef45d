//! File formats, configuration and the command-line pipeline around
//! `ksr-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use error::{CliError, Result};
