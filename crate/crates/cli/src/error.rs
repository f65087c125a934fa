use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Collapse(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Collapse(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Usage(_) => "usage",
            CliError::Solver(_) => "solver_failure",
            CliError::Collapse(_) => "collapse_detected",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() }).to_string()
    }

    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{what}: {m}")),
            CliError::Collapse(m) => CliError::Collapse(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
        }
    }
}

impl From<ptbec_core::Error> for CliError {
    fn from(e: ptbec_core::Error) -> Self {
        use ptbec_core::Error as E;
        match e {
            E::InvalidParams(_) | E::Precondition(_) => CliError::Usage(e.to_string()),
            E::Collapse { .. } => CliError::Collapse(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<ptbec_grid::Error> for CliError {
    fn from(e: ptbec_grid::Error) -> Self {
        use ptbec_grid::Error as E;
        match e {
            E::InvalidGrid(_) | E::Precondition(_) => CliError::Usage(e.to_string()),
            E::Collapse { .. } => CliError::Collapse(e.to_string()),
            E::Io(_) | E::Json(_) => CliError::Io(e.to_string()),
            E::Core(inner) => inner.into(),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
