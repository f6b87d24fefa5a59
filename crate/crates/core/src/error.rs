use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    /// The Fock truncation holds too much population near its edge.
    /// The suggested cutoffs are a starting point for a retry, not a guarantee.
    #[error(
        "truncation too small: {detail}; retry with cutoff_a >= {cutoff_a}, cutoff_b >= {cutoff_b}"
    )]
    TruncationTooSmall {
        cutoff_a: usize,
        cutoff_b: usize,
        detail: String,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("step size: {0}")]
    StepSize(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short machine-readable tag, used in CSV flag columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::IntegrationFailure(_) => "integration-failure",
            Error::TruncationTooSmall { .. } => "truncation-too-small",
            Error::NumericalFailure(_) => "numerical-failure",
            Error::StepSize(_) => "step-size",
        }
    }
}
