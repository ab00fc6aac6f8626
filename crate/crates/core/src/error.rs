use thiserror::Error;

/// Errors surfaced by the solver stack.
#[derive(Debug, Error)]
pub enum FslpError {
    /// An [`LpProblem`](crate::lp::LpProblem) failed its well-formedness checks.
    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    /// A constraint or Jacobian evaluation produced a non-finite value or failed outright.
    #[error("evaluation failed: {0}")]
    Evaluation(String),

    /// Dimension mismatch between a problem and a vector handed to it.
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// No slack assignment satisfies the constraints for the given non-slack variables.
    #[error("no feasible slack exists: {0}")]
    NoFeasibleSlack(String),

    /// The starting point handed to the outer loop is not feasible.
    #[error("initial point infeasible: h(w0) = {0:e}")]
    InfeasibleStart(f64),

    /// Invalid parameter or configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Initial guess construction failed (e.g. trajectory intersects the obstacle).
    #[error("initialization failed: {0}")]
    Initialization(String),

    /// A state the algorithm guarantees cannot happen.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = FslpError> = std::result::Result<T, E>;
