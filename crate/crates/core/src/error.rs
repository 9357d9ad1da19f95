use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
///
/// Variants fall into three families that the CLI maps to distinct exit
/// codes: invalid input or configuration, IO/format failures, and numerical
/// failures (singular models, non-convergence, divergence).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weight column {class} has zero norm")]
    DegenerateWeight { class: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: usize, k: usize },

    #[error("point lies on a decision boundary (argmax tie between classes {0} and {1})")]
    OnBoundary(usize, usize),

    #[error("covariance of component {component} is not positive definite after regularization")]
    SingularModel { component: usize },

    #[error("component {component} became empty during EM after {retries} re-initializations")]
    EmptyComponent { component: usize, retries: usize },

    #[error("root finding failed: {0}")]
    NoRoot(String),

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Diverged { epoch: usize },

    #[error("{0}")]
    Numerical(String),

    #[error("malformed {format} input: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::EmptyInput(_)
            | Error::LabelOutOfRange { .. }
            | Error::NonFinite(_) => ErrorKind::Input,
            Error::Io { .. } | Error::Format { .. } | Error::Json(_) => ErrorKind::Io,
            Error::DegenerateWeight { .. }
            | Error::OnBoundary(..)
            | Error::SingularModel { .. }
            | Error::EmptyComponent { .. }
            | Error::NoRoot(_)
            | Error::Diverged { .. }
            | Error::Numerical(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Io,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
