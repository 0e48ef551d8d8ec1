//! Crate-wide error type.

use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input failed validation (malformed distribution, bad sizes, bad spec).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// An exhaustive enumeration would exceed the configured work bound.
    #[error("exhaustive enumeration infeasible: {detail} (estimated {estimate} states, cap {cap})")]
    Infeasible {
        /// What was being enumerated.
        detail: String,
        /// Estimated number of states the enumeration would visit.
        estimate: f64,
        /// Configured cap on the number of states.
        cap: f64,
    },

    /// A conditioning event of probability zero was encountered, e.g. an
    /// observation that is impossible under the declared model.
    #[error("zero-probability conditioning event at position {index}")]
    ZeroProbability {
        /// Bit index (within the current block) at which the event occurred.
        index: usize,
    },

    /// Serialization / deserialization failure.
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),

    /// Filesystem failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Shorthand for [`Error::Invalid`].
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
