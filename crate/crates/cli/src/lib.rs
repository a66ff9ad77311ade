//! Command-line front end for the KCP weight library.

pub mod args;
pub mod commands;
pub mod suites;

pub use args::Cli;
pub use commands::{execute, run, CliError, Report};
