use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every stage of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "corpus files are not aligned: source has {source_lines} lines, target has {target_lines}"
    )]
    Alignment {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 usage, 2 data error, 3 stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 1,
            Error::Io { .. }
            | Error::Alignment { .. }
            | Error::LengthMismatch { .. }
            | Error::Parse { .. }
            | Error::Data(_) => 2,
            Error::Training(_) | Error::Calibration(_) | Error::Stage { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
