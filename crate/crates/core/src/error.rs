use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite matrix entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("spectrum is significantly negative (min eigenvalue {0:e})")]
    NegativeSpectrum(f64),

    #[error("eigenvalue iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("explicit operator of dimension {dim} exceeds materialization cap {cap}")]
    MaterializationCap { dim: usize, cap: usize },

    #[error("invalid bipartite shape {0}x{1}: each factor needs dimension >= 2")]
    InvalidShape(usize, usize),

    #[error("operation requires a square bipartite shape, got {0}x{1}")]
    NonSquareShape(usize, usize),

    #[error("operation requires a two-qubit state, got {0}x{1}")]
    NotTwoQubit(usize, usize),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("malformed state record: {0}")]
    MalformedRecord(String),

    #[error("no admissible mixing weight in bisection bracket")]
    BracketFailure,
}

pub type Result<T> = std::result::Result<T, Error>;
