use std::path::Path;

use fraclyap::lyapunov::LyapunovError;
use fraclyap::operators::OperatorError;
use fraclyap::seir::SeirError;
use fraclyap::solvers::SolverError;
use thiserror::Error;

/// Exit codes: 0 success, 1 I/O failure, 2 configuration or precondition
/// error, 3 solver divergence, 4 a VIOLATED estimate.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Divergence(String),
    #[error("{0} estimate(s) VIOLATED")]
    Violated(usize),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn missing(field: &str) -> Self {
        CliError::Config(format!("missing `{field}`"))
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::Violated(_) => 4,
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Divergence { .. } | SolverError::CorrectorNotConverged { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SeirError> for CliError {
    fn from(e: SeirError) -> Self {
        match e {
            SeirError::Solver(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<LyapunovError> for CliError {
    fn from(e: LyapunovError) -> Self {
        CliError::Config(e.to_string())
    }
}
