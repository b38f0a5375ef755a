//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the crate.
///
/// Variants are grouped so a caller (notably the CLI) can classify failures:
/// configuration problems, data/parse problems, and numeric failures.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: expected scalar, got shape {shape:?}")]
    NotScalar { op: &'static str, shape: Vec<usize> },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("missing gradient for parameter '{name}'")]
    MissingGrad { name: String },

    #[error("formula parse error at position {position}: {message}")]
    FormulaParse { position: usize, message: String },

    #[error("unknown element '{symbol}'")]
    UnknownElement { symbol: String },

    #[error("element '{symbol}' not covered by embedding table ({covered} of {total} elements covered)")]
    EmbeddingMiss {
        symbol: String,
        covered: usize,
        total: usize,
    },

    #[error("integer formula needs {needed} atoms, above the node cap {cap}; raise the cap or lower max_denominator")]
    NodeCapExceeded { needed: usize, cap: usize },

    #[error("amount for '{symbol}' rounds to zero at max_denominator {max_denominator}; increase max_denominator")]
    AmountUnderflow {
        symbol: String,
        max_denominator: u64,
    },

    #[error("singular lattice matrix")]
    SingularLattice,

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error in {path}:{line}: {message}")]
    Data {
        path: String,
        line: usize,
        message: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: 1 usage/config,
    /// 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFinite { .. } | Error::NotScalar { .. } | Error::MissingGrad { .. } => 3,
            Error::ShapeMismatch { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
