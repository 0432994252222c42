use thiserror::Error;

/// Errors raised by the library and the experiment harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid support: {0}")]
    InvalidSupport(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operation `{op}` does not support {kind} action sets")]
    UnsupportedGeometry {
        op: &'static str,
        kind: &'static str,
    },

    #[error("combinatorial budget exceeded: {required} evaluations > limit {limit}")]
    BudgetExceeded { required: u128, limit: u128 },

    #[error("could not build an invertible exploration basis after {0} attempts")]
    SingularBasis(usize),

    #[error("observation does not match the pending action")]
    NoPendingAction,

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
