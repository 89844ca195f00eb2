use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solvers, the file formats and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operation requires d = 2, got d = {0}")]
    DimensionUnsupported(usize),

    #[error("non-finite value detected at step {step} (t = {t})")]
    NumericalAbort { step: usize, t: f64 },

    #[error("time step {dt} violates the {kind} stability limit {limit}")]
    Cfl { kind: &'static str, dt: f64, limit: f64 },

    #[error("Newton shooting did not converge for target point {target:?} after {iterations} iterations")]
    NewtonDivergence { target: Vec<f64>, iterations: usize },

    #[error("caustic reached at t = {t} before the requested time")]
    Caustic { t: f64 },

    #[error("isotropic closed form requested for an anisotropic trap {omega:?}")]
    Anisotropic { omega: Vec<f64> },

    #[error("config error in [{section}].{key}: {reason}")]
    Config {
        section: String,
        key: String,
        reason: String,
    },

    #[error("config parse error: {0}")]
    ConfigSyntax(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(section: &str, key: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            section: section.to_string(),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::ConfigSyntax(_)
            | Error::InvalidParameter { .. }
            | Error::GridMismatch(_)
            | Error::DimensionUnsupported(_)
            | Error::Cfl { .. }
            | Error::Anisotropic { .. }
            | Error::Format(_)
            | Error::Io { .. } => 2,
            Error::NumericalAbort { .. }
            | Error::NewtonDivergence { .. }
            | Error::Caustic { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
