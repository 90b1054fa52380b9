use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A documented precondition does not hold for the given input.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Shapes of operands do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A numerical routine failed to converge or produced garbage.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An output invariant that must hold by construction was violated.
    #[error("invariant violation ({context}): {detail}")]
    Invariant {
        context: &'static str,
        detail: String,
    },

    /// A certificate could not be completed; the payload names the block.
    #[error("certificate failure: {0}")]
    Certificate(String),

    /// A grid or search space was exhausted without success.
    #[error("search exhausted: {0}")]
    Exhausted(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
