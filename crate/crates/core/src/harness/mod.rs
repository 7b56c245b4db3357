//! Experiment orchestration: configs, file formats, batch attacks,
//! sensitivity runs and sweep data.

mod batch;
mod config;
mod fixtures;
pub mod io;
mod plot;
mod sensitivity_run;

pub use batch::{
    aggregate, compute_batch, run_attack_batch, sensitive_direction, Aggregate, BatchOutput, FailureKind, ImageRecord,
    RecordStatus, ResultSummary, RunRecord, ADV_DIR, RECORD_CSV, RECORD_JSON, TIMINGS_JSON,
};
pub use config::{BaselineSpec, CodecKind, CodecSpec, ExperimentConfig, OracleSpec, ReportFormat, SeededCodec};
pub use fixtures::{synthetic_fixtures, write_fixtures, Fixture, FixtureSpec};
pub use plot::{emit_plot_data, plot_rows, PlotRow, SweepKey};
pub use sensitivity_run::{analyze_inputs, run_sensitivity, SensitivityEntry, SensitivityRun, SENSITIVITY_JSON};

/// JSON schema of the run record (`run_record.json`).
pub const RUN_RECORD_SCHEMA: &str = include_str!("../../schemas/run_record.schema.json");
/// JSON schema of the experiment config file.
pub const EXPERIMENT_CONFIG_SCHEMA: &str = include_str!("../../schemas/experiment_config.schema.json");
/// JSON schema of `sensitivity.json`.
pub const SENSITIVITY_SCHEMA: &str = include_str!("../../schemas/sensitivity.schema.json");
