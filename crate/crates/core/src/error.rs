use std::fmt;

/// Errors produced by the forward and inverse solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("|lambda| = {magnitude} exceeds the integrator range {limit}")]
    OutOfRange { magnitude: f64, limit: f64 },

    #[error("shell {shell}: expected {expected} zeros, found {found} ({detail})")]
    IndexingFailure {
        shell: usize,
        expected: usize,
        found: usize,
        detail: String,
    },

    #[error("lambda = {lambda} lies within {distance:e} of the eigenvalue {eigenvalue}")]
    PoleProximity {
        lambda: f64,
        eigenvalue: f64,
        distance: f64,
    },

    #[error("B(lambda) is numerically zero at lambda = {lambda} (|scaled B| = {scaled:e}); move lambda")]
    NearSingular { lambda: String, scaled: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("spectral data conversion failed: {0}")]
    ConversionFailure(String),

    #[error("reconstruction did not converge after {} iterations ({reason})", trace.len())]
    NoConvergence { reason: String, trace: Vec<f64> },

    #[error("finite-difference oracle failed: {0}")]
    OracleFailure(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl fmt::Display) -> Self {
        Error::InvalidInput(msg.to_string())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, message: impl fmt::Display) -> Self {
        Error::Format {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }

    /// True for errors caused by bad user input rather than numerics or I/O.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Format { .. })
    }

    pub fn is_io_error(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
