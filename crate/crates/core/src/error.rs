use thiserror::Error;

/// Errors produced by the estimation, spectral and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel order must be a positive even integer, got {0}")]
    InvalidKernelOrder(i64),

    /// A constraint on the bandwidth schedule exponents failed.
    /// `constraint` is the violated inequality, quoted verbatim.
    #[error("invalid estimator configuration: {detail} violates {constraint}")]
    InvalidConfig {
        constraint: &'static str,
        detail: String,
    },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("empty vector")]
    EmptyVector,

    #[error("matrix is singular: eigenvalue {eigenvalue:e} is below the floor {floor:e}")]
    Singular { eigenvalue: f64, floor: f64 },

    #[error("number of directions {requested} must lie in 1..={dim}")]
    DirectionsOutOfRange { requested: usize, dim: usize },

    #[error("matrix of shape {rows}x{cols} is rank deficient")]
    RankDeficient { rows: usize, cols: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed CSV at line {line}, column {column}: {message}")]
    Csv {
        line: u64,
        column: String,
        message: String,
    },

    #[error("unknown link function {0:?}")]
    UnknownLink(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error(
        "{failed} of {total} replicates failed, exceeding the 10% budget (first failure: {first})"
    )]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
