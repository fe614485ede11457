use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("class {class} has no {what}")]
    MissingClass { class: u16, what: &'static str },

    #[error("class {class} has {available} labeled pixels, {requested} requested")]
    InsufficientSamples {
        class: u16,
        available: usize,
        requested: usize,
    },

    #[error("rulebase needs rules from at least two classes to select rivals")]
    NoRivalClass,

    #[error("total conflict between mass functions (K = {k})")]
    TotalConflict { k: f64 },

    #[error("total conflict at fold position {position} (K = {k})")]
    TotalConflictAt { position: usize, k: f64 },

    #[error("degenerate evidence: every confidence is zero on both pixels")]
    DegenerateEvidence,

    #[error("no pixels with a ground-truth label were evaluated")]
    EmptyEvaluation,

    #[error("raster size mismatch: descriptor implies {expected} bytes, payload has {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("unknown dtype `{0}`")]
    UnknownDtype(String),

    #[error("unsupported raster format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::EmptyInput(_) => "empty_input",
            Error::MissingClass { .. } => "missing_class",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::NoRivalClass => "no_rival_class",
            Error::TotalConflict { .. } | Error::TotalConflictAt { .. } => "total_conflict",
            Error::DegenerateEvidence => "degenerate_evidence",
            Error::EmptyEvaluation => "empty_evaluation",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::UnknownDtype(_) => "unknown_dtype",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Csv { .. } => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
