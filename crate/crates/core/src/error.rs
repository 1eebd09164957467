use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the training engine.
///
/// Every variant maps onto one of three coarse classes (see [`ErrorClass`])
/// which the command-line front end turns into process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("degenerate embedding for corpus `{corpus_id}`: norm {norm:e} is below 1e-12")]
    DegenerateEmbedding { corpus_id: String, norm: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("CTC infeasible: {frames} frames cannot carry {labels} labels with {repeats} adjacent repeats")]
    CtcInfeasible {
        frames: usize,
        labels: usize,
        repeats: usize,
    },

    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },

    #[error("numeric failure at {context}: {reason}")]
    Numeric { context: String, reason: String },

    #[error("parse error in {}{}: {reason}", path.display(), line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        line: Option<usize>,
        reason: String,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    Io,
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn numeric(context: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: Option<usize>, reason: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation { .. }
            | Error::DimensionMismatch { .. }
            | Error::CtcInfeasible { .. }
            | Error::Unknown { .. }
            | Error::Parse { .. } => ErrorClass::Validation,
            Error::DegenerateEmbedding { .. } | Error::Numeric { .. } => ErrorClass::Numeric,
            Error::Io { .. } => ErrorClass::Io,
        }
    }
}
