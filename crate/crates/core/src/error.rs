use thiserror::Error;

/// Errors raised by the simulator and its diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative density {0}")]
    NegativeDensity(f64),

    #[error("coincident points: ratio is 0/0")]
    CoincidentPoints,

    #[error("regularization delta must be positive for time stepping, got {0}")]
    NonPositiveDelta(f64),

    #[error("density not bounded away from vacuum: min sqrt(rho) = {min} < {floor}")]
    VacuumDensity { min: f64, floor: f64 },

    #[error("numeric abort at step {step}: {reason}")]
    NumericAbort {
        step: usize,
        reason: String,
        max_norm_history: Vec<f64>,
    },

    #[error("insufficient snapshots: need at least {needed}, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },

    #[error("snapshot sequence not uniformly spaced or misaligned: {0}")]
    MisalignedSnapshots(String),

    #[error("test function support must end before the final time: {0}")]
    SupportTouchesEnd(String),

    #[error("mollifier scale {epsilon} not resolvable (needs >= {needed})")]
    UnresolvedMollifier { epsilon: f64, needed: f64 },

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QhdError {
    fn from(e: std::io::Error) -> Self {
        QhdError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QhdError>;
