use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Solver(#[from] gcgm_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: byte {offset}: {message}")]
    Format { path: PathBuf, offset: u64, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("reference does not match the problem (fingerprint {expected} vs {got})")]
    FingerprintMismatch { expected: String, got: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), offset, message: message.into() }
    }

    /// Process exit status: 2 for divergence or an unbounded step, 3 for
    /// malformed input files, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver(gcgm_core::Error::UnboundedStep { .. } | gcgm_core::Error::Divergence { .. }) => 2,
            Error::Format { .. } => 3,
            _ => 1,
        }
    }
}
