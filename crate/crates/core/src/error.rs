use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum WfpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "geometry violation: springs {indices:?} lie outside the computational domain [{lo}, {hi}]"
    )]
    Geometry {
        indices: Vec<usize>,
        lo: f64,
        hi: f64,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("non-finite density at step {step}")]
    NonFinite { step: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("not enough usable points for an order fit ({usable} usable, need {needed})")]
    TooFewPoints { usable: usize, needed: usize },

    #[error("truncation hypothesis violated: K = {k} < K0 + 2b/delta = {required}")]
    Hypothesis { k: usize, required: f64 },

    #[error("wrong mode: {0}")]
    WrongMode(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl WfpError {
    /// True for errors caused by invalid user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            WfpError::InvalidParameter(_)
                | WfpError::Geometry { .. }
                | WfpError::GridMismatch(_)
                | WfpError::WrongMode(_)
                | WfpError::Format(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, WfpError>;
