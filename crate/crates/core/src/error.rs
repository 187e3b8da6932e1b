use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model file: {0}")]
    Parse(String),

    /// A model or input vector failed validation; `field` names the offending
    /// entry, e.g. `m[0]` or `Q[1][0]`.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("model is not critical: lambda0 = {lambda0:e}")]
    NonCritical { lambda0: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver: {0}")]
    Eigen(String),

    #[error("log-Laplace solver: {0}")]
    Solver(String),

    #[error("extinction ladder did not converge: {0}")]
    LadderNotConverged(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("too few samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("no surviving paths")]
    NoSurvivors,
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors that reflect a bad model or a failed criticality
    /// requirement rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Validation { .. } | Error::NonCritical { .. }
        )
    }
}
