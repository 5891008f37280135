use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a precondition.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A multiplexing gain outside `[0, L * min(M, N)]` was passed to the curve.
    #[error("multiplexing gain {r} outside the curve domain [0, {max}]")]
    OutOfDomain { r: f64, max: f64 },

    #[error("state space of {count} states exceeds the budget of {budget} (deadline {deadline}, max window {max_window})")]
    StateBudget {
        count: usize,
        budget: usize,
        deadline: u32,
        max_window: u32,
    },

    #[error("transition row for state {state} action {action} sums to {sum}")]
    BadTransitionRow {
        state: usize,
        action: String,
        sum: f64,
    },

    /// Error-probability table does not cover the requested point.
    #[error("table coverage: {0}")]
    TableCoverage(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// Singular basis, non-finite iterate or an ill-posed linear system.
    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("markov chain under the policy is not unichain: {0}")]
    NotUnichain(String),

    #[error("markov chain under the policy is periodic with period {0}")]
    Periodic(usize),

    #[error("policy undefined at state {0}")]
    PolicyUndefined(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::OutOfDomain { .. }
                | Error::StateBudget { .. }
                | Error::TableCoverage(_)
                | Error::Parse(_)
                | Error::PolicyUndefined(_)
                | Error::Csv(_)
        )
    }
}
