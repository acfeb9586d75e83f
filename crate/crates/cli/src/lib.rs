//! Configuration, reproduction commands and data output for the frugal
//! crowd-sensing mechanisms.

pub mod commands;
pub mod config;
pub mod golden;
pub mod instance_file;
pub mod output;

pub use commands::{
    cmd_deviations, cmd_run, cmd_sweep, cmd_verify_examples, CliError, CommandOutput,
};
pub use config::{parse_config, parse_config_with, Command, ConfigError, Format, Layout, RunSpec};
