use std::path::PathBuf;

/// Errors raised anywhere in the reduction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hurwitz: eigenvalue with real part {max_real:e} >= 0")]
    NotStable { max_real: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("Sylvester pencil is numerically singular (pivot {pivot:e})")]
    SingularPencil { pivot: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:e}, floor {floor:e})")]
    NotPositiveDefinite { min_eig: f64, floor: f64 },

    #[error("state norm exceeded {limit:e} at t = {time}; step size too large")]
    UnstableIntegration { time: f64, limit: f64 },

    #[error("trajectories are sampled on different grids")]
    GridMismatch,

    #[error("horizon too short: |exp(A T)| = {decay:e} > {required:e}")]
    HorizonTooShort { decay: f64, required: f64 },

    #[error("only {available} Hankel singular values above threshold, {requested} requested")]
    RankDeficient { requested: usize, available: usize },

    #[error("reduced observability Gramian is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotDetectable { min_eig: f64 },

    #[error("Armijo line search failed after {backtracks} backtracks")]
    LineSearchFailed { backtracks: usize },

    #[error("invalid initial point: {0}")]
    InvalidInitialPoint(String),

    #[error("Schur decomposition did not converge")]
    NoConvergence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
