use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or hyperparameters. `field` names the offending key.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A computation produced a non-finite value.
    #[error("non-finite {what} at step {step:?} (phi = {phi:?}, theta = {theta:?})")]
    Numeric {
        what: &'static str,
        step: Option<u64>,
        phi: Vec<f64>,
        theta: Vec<f64>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data. `line` is 1-based and counts the header.
    #[error("data error at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    /// An error raised while running one seed of an experiment.
    #[error("seed {seed}, step {step}: {source}")]
    Run {
        seed: u64,
        step: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn numeric(what: &'static str, phi: &[f64], theta: &[f64]) -> Self {
        Error::Numeric {
            what,
            step: None,
            phi: phi.to_vec(),
            theta: theta.to_vec(),
        }
    }

    /// Attach a step index to a numeric error; other variants pass through.
    pub fn at_step(self, k: u64) -> Self {
        match self {
            Error::Numeric {
                what, phi, theta, ..
            } => Error::Numeric {
                what,
                step: Some(k),
                phi,
                theta,
            },
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
