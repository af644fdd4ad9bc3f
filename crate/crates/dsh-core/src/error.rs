//! Error and result types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error category, used by the CLI to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed invocation: bad flags, unreadable config, invalid settings.
    Usage,
    /// Malformed or inconsistent input data or artifact files.
    Data,
    /// Training-time failure: infeasible parameters or degenerate geometry.
    Training,
}

impl ErrorKind {
    /// Process exit code for this category (success is 0).
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Training => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying I/O failure while reading or writing `path`.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Structurally invalid file contents; `offset` is the byte position of
    /// the record or field where parsing failed.
    #[error("{path}: {message} (byte offset {offset})")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Invalid in-memory data: dimension mismatches, non-finite values,
    /// empty datasets.
    #[error("{0}")]
    Data(String),

    /// Operation parameters that violate a precondition (k out of range,
    /// zero iterations, adjacency radius too large, ...).
    #[error("{0}")]
    Param(String),

    /// Training could not proceed or converge with the given inputs.
    #[error("{0}")]
    Training(String),

    /// Fewer usable projection candidates than requested bits.
    #[error(
        "only {available} usable projection candidates for {requested} bits; \
         increase the adjacency radius or the group count factor"
    )]
    TooFewCandidates { available: usize, requested: usize },

    /// Two group centers coincide, so no separating plane exists.
    #[error("coincident group centers admit no separating plane")]
    CoincidentCenters,

    /// Bad command line or config file contents.
    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Usage,
            Error::Io { .. } | Error::Format { .. } | Error::Data(_) => ErrorKind::Data,
            Error::Param(_)
            | Error::Training(_)
            | Error::TooFewCandidates { .. }
            | Error::CoincidentCenters => ErrorKind::Training,
        }
    }
}
