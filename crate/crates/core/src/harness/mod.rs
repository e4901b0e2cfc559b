//! Experiment configuration, orchestration, aggregation and output.

pub mod bootstrap;
pub mod config;
pub mod curves;
pub mod experiment;
pub mod verify;

pub use bootstrap::bootstrap_ci;
pub use config::{ExperimentConfig, InstanceFamily, SeparationDistance};
pub use curves::{emit_curves, read_curves, CurvePoint, CURVE_HEADER};
pub use experiment::{aggregate_curves, run_experiment, run_trials, ExperimentOutput, TrialRecord};
