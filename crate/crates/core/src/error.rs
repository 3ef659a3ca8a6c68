use thiserror::Error;

/// Failures raised by the linear algebra, integration and verification layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("singular matrix: pivot {pivot:.3e} at column {column} below threshold {threshold:.3e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite evaluation at probe along coordinate {coordinate}")]
    NonFiniteEvaluation { coordinate: usize },

    #[error("point outside the domain of system '{system}'")]
    OutOfDomain { system: String },

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("stale step pair: implicit residual {residual:.3e} exceeds {limit:.3e}")]
    StalePair { residual: f64, limit: f64 },

    #[error("no consistency point: |psi1(z_k) - psi2(z_next)| = {gap:.3e}")]
    NoConsistencyPoint { gap: f64 },

    #[error("reference solution unavailable: {0}")]
    ReferenceUnavailable(String),

    #[error("matrix file: {0}")]
    MatrixFile(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SingularMatrix { .. } => "SingularMatrix",
            Error::NonFinite(_) => "NonFinite",
            Error::NonFiniteEvaluation { .. } => "NonFiniteEvaluation",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::UnknownSystem(_) => "UnknownSystem",
            Error::BadParams(_) => "BadParams",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::StalePair { .. } => "StalePair",
            Error::NoConsistencyPoint { .. } => "NoConsistencyPoint",
            Error::ReferenceUnavailable(_) => "ReferenceUnavailable",
            Error::MatrixFile(_) => "MatrixFile",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
