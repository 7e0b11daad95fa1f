use thiserror::Error;

/// Harness failures, split by the exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("malformed matrix file {path}: {reason}")]
    MatrixFile { path: String, reason: String },

    #[error(transparent)]
    Solver(#[from] precgd::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            reason: err.to_string(),
        }
    }

    /// 1 for configuration problems, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Parse(_) => 1,
            _ => 2,
        }
    }
}
