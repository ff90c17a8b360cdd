//! Experiment configuration, pipelines and reports.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{CocycleSpec, ExperimentConfig, ExperimentKind, Knobs, OutputFormat, OutputSpec, SubshiftSpec};
pub use experiments::{run, run_with_workers};
pub use report::{ExperimentReport, ExtReal, Table, Verdict, SCHEMA};
