//! Error taxonomy shared by every module.
//!
//! Four failure kinds cover the whole kernel:
//!
//! * [`Error::Shape`] — operands disagree structurally (variable layout,
//!   dimension, truncation caps) and no answer exists.
//! * [`Error::Domain`] — the input is structurally fine but outside the
//!   mathematical domain of the operation (singular linear part, nonzero
//!   constant term in a fiber slot, torsion where none is allowed, ...).
//! * [`Error::Order`] — the requested truncation order is not achievable
//!   from the data provided; `max_achievable` reports how far one can go.
//! * [`Error::Filtration`] — a graded extraction was asked of an element
//!   that does not sit in the required filtration level.
//!
//! Parse/config problems surface as [`Error::Config`] so the command-line
//! layer can map them to its own exit code.

use thiserror::Error;

/// Kernel-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Structural mismatch between operands.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested order exceeds what the inputs determine.
    #[error("order error: {context} (max achievable: {max_achievable})")]
    Order {
        context: String,
        max_achievable: i64,
    },

    /// Element is not in the filtration level the operation requires.
    #[error("filtration error: {0}")]
    Filtration(String),

    /// Invalid configuration or unparseable user input.
    #[error("config error: {0}")]
    Config(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
