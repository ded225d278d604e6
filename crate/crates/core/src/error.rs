use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    DataOrFormat,
    Optimization,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidSpec(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty dataset")]
    EmptyData,

    #[error("invalid pruning interval: th1 = {th1} > th2 = {th2}")]
    InvalidInterval { th1: f64, th2: f64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("layer `{0}` has no nonzero weights")]
    DegenerateLayer(String),

    #[error("invalid corridor: {0}")]
    Corridor(String),

    #[error("anchor selection failed: {reason}\n{listing}")]
    AnchorSelection { reason: String, listing: String },

    #[error("normalization mismatch: f1_ref {left} vs {right}")]
    NormalizationMismatch { left: f64, right: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
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

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidSpec(_) => ErrorClass::Config,
            Error::Format { .. } | Error::Io { .. } | Error::EmptyData | Error::Shape(_) => {
                ErrorClass::DataOrFormat
            }
            Error::NormalizationMismatch { .. } => ErrorClass::DataOrFormat,
            Error::Stage { source, .. } => source.class(),
            Error::InvalidInterval { .. }
            | Error::Contract(_)
            | Error::DegenerateLayer(_)
            | Error::Corridor(_)
            | Error::AnchorSelection { .. } => ErrorClass::Optimization,
        }
    }
}
