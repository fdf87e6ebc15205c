use thiserror::Error;

/// Errors raised by the engines, builders and optimizers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// A precondition on a matrix or channel (symplecticity, complete
    /// positivity, physicality) does not hold.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A linear form references a source that is not registered.
    #[error("unknown source `{0}`")]
    UnknownSource(String),

    /// The geometric-phase displacement gain has a vanishing denominator.
    #[error("singular displacement gain: numerator {numerator:e}, denominator {denominator:e}")]
    SingularGamma { numerator: f64, denominator: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Bisection bracket without a sign change.
    #[error("no threshold in bracket: {0}")]
    NoThreshold(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
