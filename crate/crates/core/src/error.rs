use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NcError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid symbol: {0}")]
    InvalidSymbol(String),

    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("{what} is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPositive { what: String, min_eig: f64 },

    #[error("{what} did not converge after {steps} steps (last change {last_change:e})")]
    NonConvergence {
        what: String,
        steps: usize,
        last_change: f64,
    },

    #[error("truncation tail {bound:e} exceeds tolerance {tol:e}")]
    TruncationTail { bound: f64, tol: f64 },

    #[error("model too small: {0}")]
    TruncationTooShort(String),

    #[error("the variety subspace is trivial at this truncation")]
    EmptyVariety,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
}

pub type Result<T> = std::result::Result<T, NcError>;

impl NcError {
    pub fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        NcError::Schema {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
