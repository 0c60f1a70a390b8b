//! Experiment harness: runs optimize/train experiments, writes `trace.csv`,
//! `summary.txt` and SVG plots, compares solvers, and computes trace
//! diagnostics (per-epoch step sizes and sampling-condition satisfaction).

pub mod config;
pub mod experiment;
pub mod plot;
pub mod trace;

pub use config::{ExperimentConfig, Mode};
pub use experiment::{
    compare, diagnostics, execute, run, write_diagnostics, ComparisonRow, ComparisonTable,
    DiagnosticsReport, RunOutput, Summary,
};
pub use trace::{RunTrace, TraceRow};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "BPGRAD_OUT";
