use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("configuration error at line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    #[error("state error: {0}")]
    State(String),

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("incompatible right-hand side for singular Neumann problem (mean {mean:e})")]
    Compatibility { mean: f64 },

    #[error("step rejected: dt = {dt:e} fell below dt_min = {dt_min:e} at t = {t}")]
    Step { t: f64, dt: f64, dt_min: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("I/O error on {path}: {source}")]
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

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigLine { .. } => 2,
            Error::Solver { .. } | Error::Compatibility { .. } | Error::Step { .. } => 3,
            Error::State(_) | Error::Hypothesis(_) => 1,
            Error::Io { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
