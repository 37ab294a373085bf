//! Experiment harness around `blag-core`: TOML configuration, seeded
//! replicate orchestration, and report/trace emission. The `blag-lab`
//! binary is a thin CLI over [`experiment::run_experiment`].

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiment::{run_experiment, RunOptions};
pub use report::{Aggregate, ExperimentReport, ReplicateReport};
