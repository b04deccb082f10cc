//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector has the wrong dimension for the requested operation.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// An input violates a type invariant (non-Hermitian, non-CPTP, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// A scalar argument is outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operator expected to be positive semidefinite has an eigenvalue
    /// below the tolerated floor.
    #[error("not positive semidefinite: min eigenvalue {0:.3e}")]
    NotPsd(f64),

    /// Memory parameters are mutually inconsistent (e.g. Nc < N0).
    #[error("inconsistent parameters: {0}")]
    InconsistentParameters(String),

    /// Too few data points for the requested fit or reconstruction.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The measurement settings do not span the operator space.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// An iterative solver hit its iteration cap. Carries the best iterate
    /// found so the caller can inspect or reuse it.
    #[error("convergence failure after {iterations} iterations (log-likelihood {log_likelihood})")]
    ConvergenceFailure {
        iterations: usize,
        log_likelihood: f64,
        best: Box<crate::tomography::BestIterate>,
    },

    /// One or more rows of an ingested counts file were rejected.
    /// Every violation is listed with its line number.
    #[error("ingestion failed with {} violation(s):\n{}", .0.len(), .0.join("\n"))]
    Ingestion(Vec<String>),

    /// Configuration file or flag could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: validation-type
    /// failures exit 2, solver non-convergence exits 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConvergenceFailure { .. } => 3,
            _ => 2,
        }
    }
}
