//! Scenario files, batch commands and their CSV/JSON outputs.

mod commands;
mod config;
mod output;

pub use commands::{
    compare_cmd, parse_regimes, randomize_cmd, robust_cmd, run_cmd, sweep_cmd, sweep_rows, CommandReport, SweepRow,
};
pub use config::{
    check_key, load_config, parse_config, ClimateSection, EconSection, RandomizationSection, RawConfig, RobustSection,
    ScenarioConfig, SolverSection, SolverSettings,
};
pub use output::{
    fmt_num, sha256_hex, timeseries_rows, write_json, OutputFile, RunManifest, Summary, TIMESERIES_HEADER,
};

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("ordering check failed: {0}")]
    Ordering(String),
}

impl ScenarioError {
    /// 2 for configuration problems, 3 for solver or output failures and 4
    /// for failed ordering checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            ScenarioError::Solver(Error::Precondition(_)) | ScenarioError::Solver(Error::Domain(_)) => 2,
            ScenarioError::Solver(_) | ScenarioError::Io(_) => 3,
            ScenarioError::Ordering(_) => 4,
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e.to_string())
    }
}

impl From<csv::Error> for ScenarioError {
    fn from(e: csv::Error) -> Self {
        ScenarioError::Io(e.to_string())
    }
}
