use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the toolkit.
///
/// Variants fall into two families: data errors (bad input files, invalid
/// records, degenerate training sets) and model errors (bundle format,
/// dimension mismatches, cascade wiring). [`Error::is_model_error`] tells
/// them apart for callers that need to report the distinction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}: line {line}: {reason}")]
    Parse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error("duplicate id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("invalid record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("length mismatch: {gold} gold labels vs {predicted} predictions")]
    LengthMismatch { gold: usize, predicted: usize },

    #[error("agreement table: {0}")]
    Agreement(String),

    #[error("external scores, line {line}: {reason}")]
    ExternalScores { line: usize, reason: String },

    #[error("dimension mismatch: model expects {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("bundle format version {found} is not supported (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("bundle checksum mismatch: file is truncated or corrupted")]
    Checksum,

    #[error("malformed bundle: {0}")]
    Bundle(String),

    #[error("cascade: {0}")]
    Cascade(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            reason: reason.into(),
        }
    }

    /// True for errors about trained artifacts rather than input data.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::UnsupportedVersion { .. }
                | Error::Checksum
                | Error::Bundle(_)
                | Error::Cascade(_)
        )
    }
}
