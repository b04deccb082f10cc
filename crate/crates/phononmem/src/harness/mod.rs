//! Configuration-driven orchestration of end-to-end runs: simulated
//! experiments, ingestion of external counts files, prediction scenarios,
//! and persistent reports.

pub mod config;
pub mod counts;
pub mod experiment;
pub mod predict;
pub mod report;

pub use config::{ExperimentConfig, Mode, Preset};
pub use counts::{export_counts, ingest_counts};
pub use experiment::{
    analyze_records, run_entangled_experiment, run_fit, run_qubit_experiment, ExperimentOutput,
};
pub use predict::{run_prediction, Scenario};
pub use report::{emit_report, PredictionRow, RunReport, TauMetrics};
