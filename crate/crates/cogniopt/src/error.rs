use std::path::PathBuf;

/// Errors of the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),

    #[error("no feasible threshold: {0}")]
    Infeasible(cogniopt_core::Error),

    #[error("validation failed: {}", failed.join(", "))]
    Validation { failed: Vec<String> },

    #[error(transparent)]
    Core(cogniopt_core::Error),
}

impl From<cogniopt_core::Error> for Error {
    fn from(e: cogniopt_core::Error) -> Self {
        match e {
            cogniopt_core::Error::Infeasible { .. } => Self::Infeasible(e),
            other => Self::Core(other),
        }
    }
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for bad input, 3 for an infeasible loss budget,
    /// 4 for failed validation checks, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Read { .. } => 2,
            Self::Core(cogniopt_core::Error::InvalidParameter { .. })
            | Self::Core(cogniopt_core::Error::Domain { .. }) => 2,
            Self::Infeasible(_) => 3,
            Self::Validation { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
