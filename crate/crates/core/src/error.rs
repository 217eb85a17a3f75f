use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// API misuse: wrong tape mode, nested runs, empty selectors and the like.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("I/O failure on {}: {source}", path.display())]
    Spill {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("corrupt data in {source_name} at byte {offset}: {reason}")]
    Corrupt {
        source_name: String,
        offset: u64,
        reason: String,
    },

    #[error("record of {size} accounted bytes does not fit the {budget}-byte memory budget")]
    Unsortable { size: u64, budget: u64 },

    #[error("run on tape {tape} is out of order at record {index}")]
    UnsortedRun { tape: u32, index: u64 },

    #[error("line {line}: {reason}")]
    Csv { line: u64, reason: String },

    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn spill(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Spill {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_phase(self, phase: &'static str) -> Self {
        match self {
            already @ Error::Phase { .. } => already,
            other => Error::Phase {
                phase,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error with phase tags stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 usage/config, 2 I/O, 3 data corruption.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Usage(_) | Error::Config(_) | Error::Schema(_) | Error::Unsortable { .. } => 1,
            Error::Spill { .. } | Error::Io(_) => 2,
            Error::Corrupt { .. } | Error::UnsortedRun { .. } | Error::Csv { .. } => 3,
            Error::Phase { .. } => unreachable!("root() strips phase tags"),
        }
    }
}
