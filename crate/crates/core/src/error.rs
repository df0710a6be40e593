//! Error type shared across the crate.

/// Crate-wide error enum. Variants map onto the failure classes the public
/// operations can hit: dimension mismatches, parameter-domain violations,
/// singular linear systems, malformed binary inputs, and configuration
/// problems surfaced by the sweep harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate column {index}: {reason}")]
    DegenerateColumn { index: usize, reason: String },

    #[error("format error at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("length error: {0}")]
    Length(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("input error: {0}")]
    Input(String),

    /// The closed-form risk formulas are undefined on p-1 <= n <= p+1.
    #[error("undefined at interpolation threshold: {0}")]
    ThresholdRegime(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
