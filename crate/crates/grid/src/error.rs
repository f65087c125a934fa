use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("collapse detected at tau = {tau} (peak cell weight {peak_weight:.3e})")]
    Collapse { tau: f64, peak_weight: f64 },
    #[error("domain too small: boundary density ratio {ratio:.3e}")]
    DomainTooSmall { ratio: f64 },
    #[error("no convergence after {steps} steps (relative energy change {change:.3e})")]
    NoConvergence { steps: usize, change: f64 },
    #[error(transparent)]
    Core(#[from] ptbec_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
