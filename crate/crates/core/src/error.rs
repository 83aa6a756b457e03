use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value violates a domain invariant (negative power, duplicate id, ...).
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: {field} = {value} is outside [0, 1]")]
    Range {
        line: u64,
        field: &'static str,
        value: f64,
    },

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The robust scatter estimate is singular (coincident or collinear subset).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("solver failed after {iterations} iterations (max violation {max_violation:e})")]
    SolverFailure {
        iterations: usize,
        max_violation: f64,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    /// Internal contract broken, e.g. a non-positive expectation value.
    #[error("internal contract violation: {0}")]
    Contract(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
