use thiserror::Error;

use crate::spinbasis::Frame;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for a chain of {qubits} spins")]
    QubitOutOfRange { index: usize, qubits: usize },

    #[error("basis index {index} out of range for {qubits} qubits")]
    BasisOutOfRange { index: usize, qubits: usize },

    #[error("{qubits} qubits exceeds the capacity limit of {cap}")]
    Capacity { qubits: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("time mismatch: expected t = {expected}, found t = {found}")]
    TimeMismatch { expected: f64, found: f64 },

    #[error("dimension mismatch: {left} vs {right} amplitudes")]
    DimensionMismatch { left: usize, right: usize },

    #[error("entanglement protocol is undefined for L = {0}; it needs at least 3 spins")]
    ProtocolUndefined(usize),

    #[error(
        "ambiguous pairing in pulse {pulse}: state {state} is equally close to {partner} \
         and {other}"
    )]
    Pairing {
        pulse: usize,
        state: usize,
        partner: usize,
        other: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fidelity ansatz out of validity: M*eps = {0} >= 1")]
    OutOfValidity(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Pairing { .. } | Error::Eigen(_) | Error::OutOfValidity(_)
        )
    }
}
