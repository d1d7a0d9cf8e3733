use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{key} = {value} is out of range (allowed: {allowed})")]
    Range {
        key: String,
        value: String,
        allowed: String,
    },

    #[error("duplicate key `{key}` on lines {first} and {second}")]
    DuplicateKey {
        key: String,
        first: usize,
        second: usize,
    },

    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("initial data incompatible with the boundary conditions: {0}")]
    Incompatible(String),

    #[error("CFL violation: {constraint} ratio {ratio:.6e} exceeds {limit:.6e}")]
    Cfl {
        constraint: &'static str,
        ratio: f64,
        limit: f64,
    },

    #[error("non-finite value encountered; last valid time {last_valid_time}")]
    NonFinite { last_valid_time: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time mismatch: auxiliary state at t={aux}, flow state at t={state}")]
    Desynchronized { aux: f64, state: f64 },

    #[error("need at least {need} checkpoints, have {have}")]
    TooFewCheckpoints { need: usize, have: usize },

    #[error("not enough active modes: need {need}, found {found}")]
    TooFewModes { need: usize, found: usize },

    #[error("checkpoint format: {0}")]
    Format(String),

    #[error("unrecognized checkpoint header: found {found}, expected {expected}")]
    Version { found: String, expected: String },

    #[error("truncated checkpoint: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("{}: content hash mismatch (expected {expected}, found {actual})", .path.display())]
    HashMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 configuration, 3 numerics, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Range { .. }
            | Error::DuplicateKey { .. }
            | Error::UnknownKey { .. }
            | Error::Incompatible(_)
            | Error::Unsupported(_) => 2,
            Error::GridMismatch
            | Error::Cfl { .. }
            | Error::NonFinite { .. }
            | Error::Desynchronized { .. }
            | Error::TooFewCheckpoints { .. }
            | Error::TooFewModes { .. } => 3,
            Error::Format(_)
            | Error::Version { .. }
            | Error::Truncated { .. }
            | Error::HashMismatch { .. }
            | Error::Io { .. } => 4,
        }
    }

    /// Short machine-readable tag for failure records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Range { .. } => "range",
            Error::DuplicateKey { .. } => "duplicate_key",
            Error::UnknownKey { .. } => "unknown_key",
            Error::GridMismatch => "grid_mismatch",
            Error::Incompatible(_) => "incompatible_data",
            Error::Cfl { .. } => "cfl",
            Error::NonFinite { .. } => "non_finite",
            Error::Unsupported(_) => "unsupported",
            Error::Desynchronized { .. } => "desynchronized",
            Error::TooFewCheckpoints { .. } => "too_few_checkpoints",
            Error::TooFewModes { .. } => "too_few_modes",
            Error::Format(_) => "format",
            Error::Version { .. } => "version",
            Error::Truncated { .. } => "truncated",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::Io { .. } => "io",
        }
    }
}
