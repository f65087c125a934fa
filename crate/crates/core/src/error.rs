use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("Gaussian product is not normalizable")]
    NonNormalizable,

    #[error("quadrature did not reach tolerance {requested:e} (achieved {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("Gram matrix is near singular (condition number {condition:e})")]
    SingularGram { condition: f64 },

    #[error("Newton search did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("imaginary-time budget exhausted at tau = {tau} (energy slope {slope:e})")]
    BudgetExhausted { tau: f64, slope: f64 },

    #[error("collapse detected (max Re a = {max_width:e})")]
    Collapse { max_width: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("finite-difference Jacobian not converged (levels differ by {difference:e})")]
    Richardson { difference: f64 },

    #[error("no eigenvalue satisfies the requested criterion")]
    Undefined,

    #[error("unclassified bifurcation event: {0}")]
    Unclassified(String),

    #[error("{0}")]
    Precondition(String),
}
