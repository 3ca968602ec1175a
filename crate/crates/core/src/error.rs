use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes; the CLI maps each onto an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Infeasible,
    Invariant,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("data length mismatch: header declares {expected} values, found {found}")]
    DataLength { expected: usize, found: usize },

    #[error("malformed polyline at line {line}: {reason}")]
    MalformedPolyline { line: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("phantom cannot be embedded: {0}")]
    PhantomInfeasible(String),

    #[error("graph is empty after masking ({0})")]
    EmptyGraph(String),

    #[error("no must-pass peaks found: {0}")]
    NoPeaks(String),

    #[error("node {0} is not in the graph")]
    InvalidNode(usize),

    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: usize, to: usize },

    #[error("{count} must-pass nodes exceeds the exact solver limit of {limit}")]
    TooManyMustPass { count: usize, limit: usize },

    #[error("{0}")]
    Pruned(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{stage} stage failed: {source} (hint: {hint})")]
    Stage {
        stage: &'static str,
        hint: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Innermost error, looking through stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MissingFile(_)
            | Error::Io { .. }
            | Error::MalformedHeader { .. }
            | Error::DataLength { .. }
            | Error::MalformedPolyline { .. } => ErrorClass::Io,
            Error::InvalidParameter { .. } | Error::Config(_) => ErrorClass::Config,
            Error::InvalidInput(_)
            | Error::GridMismatch(_)
            | Error::PhantomInfeasible(_)
            | Error::EmptyGraph(_)
            | Error::NoPeaks(_)
            | Error::InvalidNode(_)
            | Error::Unreachable { .. }
            | Error::TooManyMustPass { .. }
            | Error::Pruned(_) => ErrorClass::Infeasible,
            Error::Invariant(_) => ErrorClass::Invariant,
            Error::Stage { source, .. } => source.class(),
        }
    }
}
