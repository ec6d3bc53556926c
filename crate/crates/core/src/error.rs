use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Model parameters violate a modelling assumption, e.g. `rho * sup f >= 1`.
    #[error("model violation: {0}")]
    ModelViolation(String),

    /// Group-size constraints are infeasible or violated.
    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Divergence against a boundary parameter (`q` in {0, 1}).
    #[error("infinite divergence: D({p} || {q})")]
    InfiniteDivergence { p: f64, q: f64 },

    #[error("exhaustive search refused: {count:.3e} admissible assignments exceed budget {budget}")]
    BudgetExceeded { count: f64, budget: u64 },

    /// Estimator undefined, e.g. `rho_hat = 0` on an empty graph.
    #[error("estimator undefined: {0}")]
    Undefined(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn constraint(msg: impl Into<String>) -> Self {
        Error::Constraint(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad inputs rather than by the model or the code.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Constraint(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::BudgetExceeded { .. }
                | Error::ModelViolation(_)
        )
    }
}
