//! Error type shared across the library.

use thiserror::Error;

/// Unified error for all fallible operations in the crate.
#[derive(Debug, Error)]
pub enum FclError {
    /// Argument outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A root bracket had no sign change.
    #[error("bracket error: {0}")]
    Bracket(String),
    /// An iterative method failed to converge within its budget.
    #[error("no convergence: {0}")]
    NoConvergence(String),
    /// A model assumption (positivity, fold conditions, ...) failed.
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    /// The adaptive integrator drove the step size below its floor.
    #[error("step underflow: {0}")]
    StepUnderflow(String),
    /// The step budget was exhausted before reaching the target.
    #[error("max steps exceeded: {0}")]
    MaxSteps(String),
    /// Integration finished without the requested terminal event firing.
    #[error("no event: {0}")]
    NoEvent(String),
    /// A root scan found no sign change within its horizon.
    #[error("no bracket: {0}")]
    NoBracket(String),
    /// Input unusable for a fit or estimate (too few points, mixed signs...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    /// Configuration file problems (unknown keys, bad values, I/O).
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, FclError>;
