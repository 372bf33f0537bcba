use thiserror::Error;

/// Errors raised by the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical blow-up at step {step}: {reason}")]
    NumericalBlowup { step: usize, reason: String },

    #[error("undefined measurement: {0}")]
    UndefinedMeasurement(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("invalid configuration:\n{0}")]
    Config(#[from] crate::config::ConfigErrors),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for failures caused by the inputs.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::InvalidArgument(_) | Error::UnknownScenario(_) | Error::Config(_)
        )
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBlowup { .. } | Error::UndefinedMeasurement(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
