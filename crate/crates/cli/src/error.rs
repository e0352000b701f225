use hho_core::HhoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh error ({source_name}): {err}")]
    Mesh { source_name: String, err: HhoError },

    #[error("solver error: {0}")]
    Solver(HhoError),

    #[error("{failed} of {total} checks failed")]
    CheckFailed { failed: usize, total: usize },

    #[error("cannot write output {path}: {err}")]
    Output { path: String, err: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed { .. } => 1,
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Mesh { .. } => 3,
            CliError::Solver(_) => 4,
        }
    }
}

/// Solver-stage errors, except input validation which is a configuration
/// problem.
impl From<HhoError> for CliError {
    fn from(e: HhoError) -> Self {
        match e {
            HhoError::InvalidInput(msg) => CliError::Config(msg),
            other => CliError::Solver(other),
        }
    }
}
