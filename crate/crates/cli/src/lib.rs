//! Experiment harness for the risk-aware MPPI planner: configuration files,
//! batch runs with trace and table output, and the estimator accuracy check.

pub mod config;
pub mod estimator;
pub mod run;

pub use config::{ExperimentConfig, Planner};
pub use estimator::{validate_estimator, EstimatorReport};
pub use run::run;
