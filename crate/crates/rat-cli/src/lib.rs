//! Library surface of the experiment runner, so the commands are callable
//! from integration tests without spawning the binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_eval, cmd_gaps, cmd_probe, cmd_sweep, cmd_train, TrainOutputs};
pub use config::{parse_config, parse_config_str, ExperimentConfig, TrainMethod};
pub use error::{CliError, CliResult};
