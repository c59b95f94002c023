//! Experiment driver: configuration, well-prepared data, Mach continuation,
//! identity suites and file output.

pub mod config;
pub mod init;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use init::{initial_data, well_prepared_init, InitialData, Recipe};
pub use run::{
    acoustic_run, assemble_report, continuation_runs, essential_residual_split, run_continuation, run_single, simulate, ContinuationRuns, ConvergenceReport, ReportRow,
    RunMetrics, RunOutcome,
};
