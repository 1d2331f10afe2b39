//! Configuration, command dispatch and result files for `tumor-spectra`.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run_command, Command, RunError, Summary};
pub use config::{parse_config, parse_config_str, RunConfig};
pub use tumor_spectra_core as core;
