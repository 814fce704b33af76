//! Experiment harness for the coverage-search toolkit: configuration,
//! orchestration, and report/plot emission. The CLI in `main.rs` is a thin
//! shell over this library so integration tests can drive everything
//! in-process.

pub mod config;
pub mod plots;
pub mod runner;

pub use config::{ExperimentConfig, OptimizerSpec, ProblemSource, CONFIG_VERSION};
pub use runner::{
    file_tag, CoverageMode, CoverageOutcome, Experiment, RunRecord, SummaryRow,
};
