//! File formats, instance generation and commands for the `stopgame` binary.

#![allow(clippy::result_large_err)]

pub mod commands;
pub mod error;
pub mod format;
pub mod gen;
pub mod profile;
pub mod report;

pub use commands::{run, Cli, Command};
pub use error::{CliError, CliResult};
pub use format::{emit_game, parse_game, Game};
