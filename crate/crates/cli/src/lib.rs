//! Command-line front end for `adcluster`: configuration files, checkpoints,
//! CSV reports and the run / sweep / eval / synth commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod report;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointError, Entry};
pub use commands::{cmd_eval, cmd_run, cmd_sweep_lambda, cmd_synth, CliError, Overrides, RunSummary};
pub use config::{parse_config, ConfigError, RunConfig};
