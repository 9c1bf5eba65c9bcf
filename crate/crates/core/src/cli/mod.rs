//! Configuration-driven experiment runner.
//!
//! Configs are flat `key = value` text files (`#` starts a comment, lists are
//! comma separated). Run records are CSV files with one row per evaluation:
//!
//! ```text
//! replicate,iteration,batch_index,x0,..,x{d-1},y,best_so_far,design_time_s,eval_time_s,wall_clock_s
//! ```

pub mod config;
pub mod experiment;
pub mod record;
pub mod study;
pub mod summarize;

use thiserror::Error;

pub use config::{ExperimentConfig, StudyConfig};
pub use experiment::{run_experiment, ExperimentRecord, Summary};
pub use record::{parse_rows, write_header, write_rows};
pub use study::{run_lipschitz_study, StudyRow};
pub use summarize::{summarize, SeriesRow};

/// Environment variable that overrides the `seed` key of any config.
pub const SEED_ENV: &str = "LIPBATCH_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

impl From<crate::error::Error> for CliError {
    fn from(e: crate::error::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
