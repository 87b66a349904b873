use thiserror::Error;

/// Errors raised by the numeric and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    BadTrace { trace: f64 },

    #[error("matrix is not unitary (max deviation of U^dagger U from I is {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("state vector has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },

    #[error("invalid register dimension {0}; registers need dimension >= 2")]
    BadRegisterDim(usize),

    #[error("invalid layout: {0}")]
    Layout(String),

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("target is not diagonal in the computational basis (max off-diagonal {offdiag:e})")]
    NotDiagonal { offdiag: f64 },

    #[error("fixed-point solver did not converge after {iterations} iterations (best residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("channel is not trace preserving (deviation {deviation:e})")]
    NotTracePreserving { deviation: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{0}")]
    Parse(String),

    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
