//! Config-driven runner for the amalgam experiments: `oracle`, `sample`,
//! `verify`, `cover` and `all`.

pub mod config;
pub mod manifest;
pub mod run;

pub use config::{ConfigError, ExperimentConfig, Validated};
pub use run::{run, Command, Outcome, RunError, RunOptions};
