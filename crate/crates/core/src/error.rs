use thiserror::Error;

/// Errors raised while building meshes, local operators, or solving.
#[derive(Debug, Error)]
pub enum HhoError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("face {face} is not supported here: {msg}")]
    UnsupportedFace { face: usize, msg: String },

    #[error("local solve failed on cell {cell}: {msg}")]
    LocalSolve { cell: usize, msg: String },

    #[error("mass matrix is numerically rank deficient: {0}")]
    Conditioning(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HhoError {
    /// True for errors that originate in the mesh description itself.
    pub fn is_mesh_error(&self) -> bool {
        matches!(
            self,
            HhoError::Parse { .. }
                | HhoError::Topology(_)
                | HhoError::Geometry(_)
                | HhoError::UnsupportedFace { .. }
                | HhoError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, HhoError>;
