//! Command-line front end: flat run configuration, manifests, the
//! subcommands and the benchmark harness they share.

pub mod bench;
pub mod cli;
pub mod commands;
pub mod config;
pub mod manifest;

pub use cli::{exit_code, run, EXIT_IO, EXIT_OK, EXIT_STATE, EXIT_VALIDATION};
pub use config::Settings;
