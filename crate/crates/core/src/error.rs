use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("return mapping did not converge (trial von Mises {trial_mises:.6e}, residual {residual:.3e})")]
    ReturnMapping { trial_mises: f64, residual: f64 },

    #[error("constitutive failure at element {element}, integration point {ip}: {source}")]
    Constitutive {
        element: usize,
        ip: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("history retrace failed at committed step {step}: {source}")]
    Retrace {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular linear system (pivot {pivot} = {value:.3e})")]
    Singular { pivot: usize, value: f64 },

    #[error("GP covariance factorization failed after maximum jitter (condition estimate {condition:.3e})")]
    Factorization { condition: f64 },

    #[error("step commit rejected: {0}")]
    Commit(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
