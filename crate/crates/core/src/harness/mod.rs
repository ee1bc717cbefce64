//! Experiment orchestration: configuration, parallel jobs over presets and
//! sweeps, persisted artifacts and cross-method reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, QuantityEntry, RegimeTag, Route, SweepMode, Target, Tolerance, Tolerances};
pub use report::{compare_report, Comparison, Report};
pub use run::{render_results, run_experiment, Manifest, Method, Provenance, ResultRow, ResultSet, RunOutcome};
