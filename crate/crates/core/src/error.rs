use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation (index 0, short weight sequence, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A user-supplied value failed validation.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// Config file syntax or content error.
    #[error("{path}:{line}: {reason}")]
    Config {
        path: String,
        line: usize,
        reason: String,
    },

    /// The stepper could not keep the state inside the non-negative cone.
    #[error(
        "stiffness: component c_{component} stays below the negativity floor after {halvings} step halvings at t = {t}"
    )]
    Stiffness {
        component: usize,
        halvings: usize,
        t: f64,
    },

    /// The right-hand side or a stage value became NaN or infinite.
    #[error("non-finite value in component c_{component} at t = {t}")]
    NonFinite { component: usize, t: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical scheme (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Stiffness { .. } | Error::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
