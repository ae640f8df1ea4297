use thiserror::Error;

use crate::bounds::CaseTag;

/// Errors raised by the model, bounds, solver, policy and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probability {0} is outside [0, 1)")]
    InvalidProbability(f64),

    #[error("odds ratio {0} must be a finite nonnegative number")]
    InvalidOdds(f64),

    #[error("duration {0} must be nonnegative")]
    NegativeTime(f64),

    #[error("state ({phi_x}, {phi_p}, {phi_1}) lies outside the feasible set")]
    InfeasibleState { phi_x: f64, phi_p: f64, phi_1: f64 },

    #[error("operation requires {expected}, but the parameters are in {actual}")]
    CaseMismatch {
        expected: &'static str,
        actual: CaseTag,
    },

    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),

    #[error("value-function sequence is empty")]
    EmptySequence,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "solver diverged after {iterations} iterations \
         (last sup-norm change {last_change:e}, ratio {ratio})"
    )]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        ratio: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
