//! Experiment harness: TOML run configurations, grid execution, trace and
//! report files, cross-run comparison.

pub mod compare;
pub mod config;
pub mod io;
pub mod runner;

pub use compare::{compare, compare_files, CompareError, ComparisonRow};
pub use config::{AlgorithmName, ConfigError, RunConfig};
pub use runner::{
    execute, run_cell, CellOutput, CellSummary, ChecksFile, HarnessError, ReportFile,
};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A run failed or an enabled check did not pass.
    pub const FAILED: u8 = 1;
    /// Bad configuration or usage.
    pub const USAGE: u8 = 2;
}
