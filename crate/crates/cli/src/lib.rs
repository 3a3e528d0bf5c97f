//! Command-line driver: config parsing, command dispatch and report files.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, write_outcome, CliError, Command, Outcome};
pub use config::{parse_config, ConfigError, RunConfig};
pub use report::{Report, Section, Value};
