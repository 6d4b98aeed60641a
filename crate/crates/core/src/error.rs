use thiserror::Error;

/// Errors raised by the models, statistics and estimators in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (parameter
    /// constraints, out-of-support points, malformed grids).
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation is not defined for this model (e.g. a backward score on
    /// an unbounded support).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// The sample is too degenerate for the requested procedure.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Inconsistent configuration (bootstrap sizes, bounds, levels).
    #[error("configuration error: {0}")]
    Config(String),

    /// The objective is not finite at the starting point of a minimization.
    #[error("objective is not finite at the starting point {0:?}")]
    NonFiniteStart(Vec<f64>),

    /// A textual model or distribution specification could not be parsed.
    #[error("invalid specification `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
