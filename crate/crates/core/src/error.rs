use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spline parameter {0} is outside [0, 1]")]
    Domain(f64),

    #[error("degenerate shape: |area| = {0:e} m^2")]
    DegenerateShape(f64),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("decimation failed: {0}")]
    DecimationFailed(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Every class log-likelihood was `-inf`; the prior is kept.
    #[error("degenerate class update: every class log-likelihood is -inf")]
    DegenerateUpdate,

    #[error("dictionary entry `{entry}`: {reason}")]
    Load { entry: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
