use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A point handed to an evaluation routine lies outside the declared domain.
    #[error("point {point:?} outside declared domain ({detail})")]
    DomainViolation { point: [f64; 2], detail: String },

    /// A rate evaluation broke one of its declared uniform bounds.
    #[error("rate bound violated at z={z:?}: {detail}")]
    BoundViolation { z: [f64; 2], detail: String },

    /// A spec field or parameter combination is invalid.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Precondition of an operation not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A normalizing constant or series diverges (traffic intensity too close to 1).
    #[error("divergent quantity: {0}")]
    Divergence(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: estimate {estimate}, error bound {error} after {intervals} intervals")]
    QuadratureNonConvergent {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    /// A scale factor or matrix entry exceeded double-precision range.
    #[error("numeric overflow: {0}")]
    Overflow(String),

    /// Event-driven simulation exceeded its event budget.
    #[error("event budget of {budget} exhausted at t={t}")]
    EventBudget { budget: u64, t: f64 },

    /// The state of a stepped simulation became non-finite.
    #[error("non-finite state at t={t}: {detail}")]
    NonFiniteState { t: f64, detail: String },

    /// Empirical survival curve is not dominated by any admissible exponential.
    #[error("exponential tail fit rejected: {0}")]
    NonExponentialTail(String),

    /// Two distributions are on incompatible discretizations.
    #[error("mismatched partitions: {0}")]
    MismatchedPartitions(String),

    /// Not enough data to run the requested estimator.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Jump-kernel overlap constant q is 1; no uniform coupling guarantee exists.
    #[error("coupling rejected: {0}")]
    CouplingRejected(String),

    /// Two supposedly identical algebraic routes disagree.
    #[error("internal cross-check failed: {0}")]
    CrossCheck(String),
}

pub type Result<T> = std::result::Result<T, Error>;
