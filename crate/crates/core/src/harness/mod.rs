//! Configuration, experiment pipelines, CSV reports and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod report;

pub use cli::{cli_dispatch, cli_dispatch_with_env};
pub use config::{
    parse_config, ConfigSource, ExperimentConfig, PenaltySpec, SchemeSpec, SignalSpec,
};
pub use experiment::{run_checks, run_hull, run_oracle_ratio};
pub use report::{Estimator, RiskReport, RiskRow};
