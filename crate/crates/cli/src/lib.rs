//! Command-line harness: configuration, run orchestration and output files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{ConfigError, Mode, RunConfig, Settings};
pub use run::{run, Outcome, SetupError, Status};
