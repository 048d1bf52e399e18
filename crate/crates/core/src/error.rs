use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments, malformed configuration, or contract violations by the caller.
    #[error("input error: {0}")]
    Input(String),

    /// NaN/Inf produced inside the numeric core.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Parse failure in an on-disk dataset, pointing at the offending line.
    #[error("load error in {}:{line}: {msg}", file.display())]
    Load {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("i/o error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code: 1 for caller mistakes, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Load { .. } => 1,
            Error::Numeric(_) | Error::Eval(_) | Error::Io { .. } => 2,
        }
    }
}
