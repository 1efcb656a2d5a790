use thiserror::Error;

/// Errors raised by kernel evaluation and the supporting machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A request exceeds a configured capability limit (table order, dimension).
    #[error("capability error: {what} exceeds the configured cap {cap}")]
    Capability { what: String, cap: usize },

    /// Evaluation hit a genuine pole of a trigonometric term at `k * pi`.
    #[error("pole at lattice point {k}*pi (z = {z})")]
    Pole { k: i64, z: f64 },

    /// Quadrature refinement stopped at its node budget without converging.
    #[error("accuracy error: no convergence at {nodes} nodes (last estimates {last:e}, {previous:e})")]
    Accuracy {
        nodes: usize,
        last: f64,
        previous: f64,
    },

    /// A self-consistency check failed; signals a bug upstream.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
