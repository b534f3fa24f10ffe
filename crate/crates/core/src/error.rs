use thiserror::Error;

/// Errors raised by the analytic evaluators and samplers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MgcpError {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameter `{field}`: {detail}")]
    InvalidParameter { field: String, detail: String },

    #[error("series did not converge after {terms} terms (partial sum {partial:e})")]
    NonConvergence { partial: f64, terms: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("ill-conditioned evaluation: {0}")]
    Conditioning(String),
}

impl MgcpError {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        MgcpError::Domain {
            func,
            detail: detail.into(),
        }
    }

    pub(crate) fn param(field: impl Into<String>, detail: impl Into<String>) -> Self {
        MgcpError::InvalidParameter {
            field: field.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, MgcpError>;
