use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("singular system: pure-Neumann right-hand side incompatible (relative residual {residual:.3e})")]
    SingularSystem { residual: f64 },

    #[error("step failure: {0}")]
    StepFailure(String),

    #[error("blow-up: |w| exceeded {bound:e} at t = {time:.6e}")]
    BlowUp { bound: f64, time: f64 },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate error: {0}")]
    DegenerateError(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
