use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("model is not fitted: {0}")]
    Unfitted(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// An error raised inside a named pipeline stage.
    #[error("[{module}/{stage}] {source}")]
    Stage {
        module: &'static str,
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

    /// Wraps `self` with the stage and module it surfaced from.
    pub fn in_stage(self, module: &'static str, stage: impl Into<String>) -> Self {
        Error::Stage {
            module,
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::Range(_) => 2,
            Error::Parse(_)
            | Error::Dimension(_)
            | Error::Data(_)
            | Error::Io { .. }
            | Error::Label(_)
            | Error::Empty(_) => 3,
            Error::Degenerate(_) | Error::Singular(_) | Error::Unfitted(_) | Error::Numeric(_) => 4,
            Error::Stage { .. } => unreachable!("root() strips stage wrappers"),
        }
    }
}
