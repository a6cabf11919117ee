use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is disconnected: {0}")]
    DisconnectedGraph(String),

    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("degenerate noise: {0}")]
    DegenerateNoise(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid control vector: {0}")]
    InvalidControl(String),

    #[error("invalid controllable set: {0}")]
    InvalidControllableSet(String),

    #[error("controllable set covers every node; use the full-controllability solver")]
    FullSetRequested,

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("KKT system is singular")]
    SingularKkt,

    #[error("invalid controllable count k={k} for n={n}")]
    InvalidK { k: usize, n: usize },

    #[error("load profile is not balanced (sum {0:e})")]
    UnbalancedProfile(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by unreadable or malformed input files.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::Json(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
