use thiserror::Error;

/// Errors raised by the analytic and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("tail truncation could not be certified: {0}")]
    Truncation(String),

    #[error("grid step too coarse: {0}")]
    Step(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("method unavailable: {0}")]
    MethodUnavailable(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> LabError {
    LabError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
