//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Errors are diagnostic values,
//! not control flow: callers that hit one have violated a documented
//! precondition (dimension caps, register layouts, normalization) or fed the
//! library a malformed matrix.

use thiserror::Error;

/// Errors raised by state construction, oracle queries, and experiments.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{qubits} qubits exceeds the configured cap of {cap}")]
    DimensionOverflow { qubits: usize, cap: usize },

    #[error("vector is not normalized: |Σ|a_i|² − 1| = {0:.3e}")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian: max |A − A†| entry = {0:.3e}")]
    NotHermitian(f64),

    #[error("matrix is not unitary: ‖U†U − I‖_F = {0:.3e}")]
    NotUnitary(f64),

    #[error("trace deviates from 1 by {0:.3e}")]
    BadTrace(f64),

    #[error("matrix is not positive semidefinite: min eigenvalue = {0:.3e}")]
    NotPositive(f64),

    #[error("invalid subsystem specification: {0}")]
    InvalidSubsystem(String),

    #[error("invalid bit string: {0}")]
    InvalidBitString(String),

    #[error("invalid oracle query: {0}")]
    InvalidQuery(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("black box is not unitary: column Gram deviation = {0:.3e}")]
    NonUnitaryBlackBox(f64),

    #[error(
        "candidate declared quasi-pure but its ancilla reset fidelity is {fidelity} \
         (threshold {threshold})"
    )]
    QuasiPureViolation { fidelity: f64, threshold: f64 },

    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
