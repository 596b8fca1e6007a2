use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input (state, control, disturbance) is NaN or infinite.
    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    /// A parameter set or strategy violates its stated invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The forward rollout produced a non-finite state.
    #[error("rollout diverged at virtual step {step}")]
    RolloutDiverged { step: usize },

    /// A QP subproblem broke down (indefinite reduced Hessian or iteration limit).
    #[error("solver failure: {0}")]
    Solver(String),

    /// The brute-force oracle was asked for more work than its budget allows.
    #[error("brute-force budget exceeded: horizon {horizon}, {points} points per step")]
    BudgetExceeded { horizon: usize, points: usize },

    /// A scenario file could not be parsed or validated.
    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { what, value })
    }
}
