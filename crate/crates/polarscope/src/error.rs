use std::path::PathBuf;

/// Everything that can stop a command.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Data(String),

    #[error("too many malformed rows ({bad} of {total}); first offending rows: {rows:?}")]
    Malformed { bad: usize, total: usize, rows: Vec<usize> },

    #[error("stage `{stage}` failed: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: polarscope_core::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn numeric(stage: &'static str, source: polarscope_core::Error) -> Self {
        Error::Numeric { stage, source }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io { .. } | Error::Data(_) | Error::Malformed { .. } => 3,
            Error::Numeric { source, .. } => match source {
                polarscope_core::Error::TooFewEligible { .. } | polarscope_core::Error::InvalidParameter { .. } => 2,
                polarscope_core::Error::Empty(_) | polarscope_core::Error::NoValidWindows => 3,
                _ => 4,
            },
        }
    }
}
