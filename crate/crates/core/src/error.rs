use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what} out of domain: {value}")]
    Domain {
        /// Name of the offending argument.
        what: &'static str,
        /// Value that was rejected.
        value: f64,
    },

    /// A configuration value violates a structural invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        /// Parameter name.
        name: &'static str,
        /// Human readable reason.
        reason: &'static str,
    },

    /// The fading model has no density (point-mass models).
    #[error("fading model has no density")]
    NoDensity,

    /// Quantile of probability one requested from an unbounded distribution.
    #[error("unbounded quantile requested at u = {u}")]
    UnboundedQuantile {
        /// Requested probability level.
        u: f64,
    },

    /// Adaptive quadrature failed to reach its tolerance.
    #[error(
        "quadrature did not converge on [{lower}, {upper}]: estimate {estimate}, \
         error {error_estimate} after {intervals} intervals"
    )]
    Quadrature {
        /// Lower integration limit.
        lower: f64,
        /// Upper integration limit.
        upper: f64,
        /// Last integral estimate.
        estimate: f64,
        /// Last global error estimate.
        error_estimate: f64,
        /// Number of subintervals in use when the budget ran out.
        intervals: usize,
    },

    /// A zero dual variable gives an unbounded water level.
    #[error("dual variable is zero: water level unbounded")]
    UnboundedWaterLevel,

    /// No sensing threshold satisfies the primary-user capacity-loss budget.
    #[error(
        "infeasible: primary capacity loss constraint binds everywhere \
         (loss {min_loss} at eta = {eta} exceeds budget {budget})"
    )]
    Infeasible {
        /// Threshold with the smallest loss in the searched range.
        eta: f64,
        /// Loss at that threshold.
        min_loss: f64,
        /// Allowed loss `q * C_p,max`.
        budget: f64,
    },
}

/// Crate-wide result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;
