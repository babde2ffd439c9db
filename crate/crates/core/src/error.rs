use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// `||z + b|| = 0` for a functional with a negative exponent. The event
    /// has probability zero under a nondegenerate noise model.
    #[error("singular functional: shifted coordinate norm vanishes")]
    Singular,

    #[error("order {requested} exceeds the {available} available coefficients")]
    OrderTooLarge { requested: usize, available: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
