use std::fmt;

use thiserror::Error;

/// Failure classes raised by an external design evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorErrorKind {
    Timeout,
    Malformed,
    NonzeroExit,
    Io,
}

impl fmt::Display for EvaluatorErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EvaluatorErrorKind::Timeout => "timeout",
            EvaluatorErrorKind::Malformed => "malformed",
            EvaluatorErrorKind::NonzeroExit => "nonzero exit",
            EvaluatorErrorKind::Io => "io",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation precondition (bad action, shape mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("evaluator error ({kind}): {diagnostics}")]
    Evaluator {
        kind: EvaluatorErrorKind,
        diagnostics: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration or data file contents.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn evaluator(kind: EvaluatorErrorKind, diagnostics: impl Into<String>) -> Self {
        Error::Evaluator {
            kind,
            diagnostics: diagnostics.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn evaluator_kind(&self) -> Option<EvaluatorErrorKind> {
        match self {
            Error::Evaluator { kind, .. } => Some(*kind),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
