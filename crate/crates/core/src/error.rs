use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("blocking delay tau={tau} outside 1..={rate}")]
    TauOutOfRange { tau: usize, rate: usize },

    #[error("state matrix A is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularA { condition: f64 },

    #[error("resolvent ZI - A_tau is singular or ill-conditioned at Z={z} (condition estimate {condition:e})")]
    ResolventSingular { z: crate::C64, condition: f64 },

    #[error("evaluation point Z must be nonzero")]
    ZeroZ,

    #[error("system is not tall (class {0:?}); no prediction available")]
    NotTallClass(crate::SystemClass),

    #[error("fixture `{fixture}` does not support these dimensions: {reason}")]
    UnsupportedDims { fixture: String, reason: String },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("unknown agreement check `{0}`")]
    UnknownCheck(String),

    #[error("random compression stayed ill-conditioned after {attempts} draws")]
    CompressionFailure { attempts: usize },

    #[error("feedthrough matrix is not square and invertible: {0}")]
    SingularD(String),

    #[error("eigenvalue iteration did not converge for a {size}x{size} matrix")]
    ConvergenceFailure { size: usize },

    #[error("invalid tolerance policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
