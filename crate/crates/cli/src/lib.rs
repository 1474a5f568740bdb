//! Experiment orchestration for the `tcmem` command-line tool: config files,
//! bundled recipes, end-to-end memory experiments and the command handlers.

pub mod commands;
pub mod config;
pub mod experiment;

pub use config::{recipe, ExperimentConfig, NoiseConfig, RoundsRule};
pub use experiment::{run_experiment, Arm, ExperimentReport, Prepared, Row};
