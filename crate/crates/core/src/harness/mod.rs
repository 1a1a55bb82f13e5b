//! Scenario configuration, the deterministic multi-robot simulator,
//! convergence metrics, seed sweeps and output files.

mod config;
mod metrics;
mod output;
mod sim;
mod sweep;

pub use config::{
    table2_delays, AxisProgram, ControllerKind, MetricsConfig, Mode, RobotSpec, ScenarioConfig, DEFAULT_DT,
};
pub use metrics::{
    axis_errors, convergence_time, error_reduction, settling_time, steady_state_error, summarize, summarize_paired,
    window_mean_error, AxisErrors, ErrorReduction, RunSummary,
};
pub use output::{csv_header, emit_comparison, emit_outputs, emit_sweep, write_csv};
pub use sim::{run_scenario, RobotRecord, StepRecord, TimeSeries};
pub use sweep::{
    repeat_seed, run_baseline_comparison, run_baseline_repeats, run_comparison_series, run_delay_sweep, run_repeats,
    BaselineComparison, ComparisonRuns, SweepRow,
};

use thiserror::Error;

use crate::comms::CommsError;
use crate::control::ControlError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    ConfigInvalid(String),
    #[error("window of {window} s exceeds the {available} s after onset")]
    WindowTooLong { window: f64, available: f64 },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Comms(#[from] CommsError),
}
