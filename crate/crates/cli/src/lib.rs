//! Experiment driver: declarative configs, balancing runs, evaluation reports.

pub mod config;
pub mod report;
pub mod run;
pub mod theta;

pub use config::{load_config, parse_config, ConfigError, Experiment, ExperimentConfig};
pub use report::{aggregate, Report};
pub use run::{run_balance, run_evaluate, BalanceOutcome, RunArtifacts, RunError, RunOptions};
