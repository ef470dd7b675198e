use std::path::PathBuf;

use qcompat::Error;
use thiserror::Error;

/// Exit code for malformed input, failed validation and I/O problems.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit code when a solver stops without a certified answer.
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot parse {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{context}: {message}")]
    Invalid { context: String, message: String },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn invalid(context: &str, message: impl Into<String>) -> Self {
        Self::Invalid {
            context: context.to_string(),
            message: message.into(),
        }
    }

    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            CliError::Core(
                Error::Solver { .. } | Error::BoundaryState(_) | Error::SingularLog { .. } | Error::InvalidProblem(_)
            )
        )
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_solver_failure() {
            EXIT_SOLVER
        } else {
            EXIT_VALIDATION
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
            _ if self.is_solver_failure() => "solver",
            _ => "validation",
        }
    }
}
