use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A requested size exceeds a resource guard.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A user-supplied function produced a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("index ({row}, {col}) out of bounds for a {n}x{n} matrix")]
    Bounds { row: usize, col: usize, n: usize },

    /// Factorization broke down (matrix not positive definite).
    #[error("solver error: {0}")]
    Solver(String),

    /// The solve finished but missed its residual contract.
    #[error("residual contract unmet: relative residual {residual:e} > {tolerance:e}")]
    Convergence { residual: f64, tolerance: f64 },

    /// A surrogate model violates its structural preconditions.
    #[error("degenerate model: {0}")]
    Model(String),

    #[error("invalid configuration: {0}")]
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
