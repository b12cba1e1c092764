use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in a model or config file (missing function, unknown label, ...).
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("malformed kernel: {0}")]
    MalformedKernel(String),
    #[error("discount must be positive, got {0}")]
    NonpositiveDiscount(f64),
    #[error("H0 violated: {0}")]
    H0Violation(String),
    #[error("bound violated: {0}")]
    BoundViolation(String),
    #[error("randomization weights must be positive: {0}")]
    NonpositiveRandomization(String),
    #[error("flow step of length {step} exceeds cell width {cell}; reduce dt_flow")]
    StepTooLarge { step: f64, cell: f64 },
    #[error("more than {0} jumps on one path")]
    ExplodingJumps(usize),
    #[error("log Girsanov weight {0} outside double range")]
    WeightOverflow(f64),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical machinery as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepTooLarge { .. }
                | Error::ExplodingJumps(_)
                | Error::WeightOverflow(_)
                | Error::NoConvergence { .. }
        )
    }
}
