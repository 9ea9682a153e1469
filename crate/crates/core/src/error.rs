use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("invalid value range [{m}, {max}]: need 0 < m <= M")]
    InvalidRange { m: f64, max: f64 },

    #[error("dimension n = {n} is outside the supported domain ({expected})")]
    Domain { n: usize, expected: &'static str },

    #[error("p = {p} is not admissible for n = {n}: violates the {bound} bound of ({lo}, {hi})")]
    Inadmissible {
        n: usize,
        p: f64,
        lo: f64,
        hi: f64,
        bound: &'static str,
    },

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("window error: {0}")]
    Window(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    StepFailure { iterations: usize, residual: f64 },

    #[error("positivity lost: minimum {min:e} below floor {floor:e}")]
    Positivity { min: f64, floor: f64 },

    #[error("condition ({condition}) violated{}: {detail}", node.map(|i| format!(" at node {i}")).unwrap_or_default())]
    ConditionViolation {
        condition: &'static str,
        node: Option<usize>,
        detail: String,
    },

    #[error("pinch condition violated: (M/m)^(p-1) = {ratio} is not below the threshold {threshold}")]
    PinchViolated { ratio: f64, threshold: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
