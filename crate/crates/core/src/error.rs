use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are split into two families: input/configuration problems
/// (see [`Error::is_validation`]) and failures that happen while computing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}: {message}")]
    Validation { sentence: String, message: String },

    #[error("sentence {sentence}: tree structure: {message}")]
    Structure { sentence: String, message: String },

    #[error("line {line}: format: {message}")]
    Format { line: usize, message: String },

    #[error("{metric} is undefined for sentence {sentence}: {reason}")]
    UndefinedMetric {
        metric: &'static str,
        sentence: String,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("no rule pack for language(s): {0}")]
    MissingPack(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("undefined selectivity score: {0}")]
    UndefinedScore(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs or configuration rather than by a
    /// failing computation. The CLI maps these to exit code 1.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Structure { .. }
            | Error::Format { .. }
            | Error::Config(_)
            | Error::MissingPack(_)
            | Error::InvalidInput(_)
            | Error::Shape(_)
            | Error::Json(_)
            | Error::Io { .. } => true,
            Error::Layer { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
