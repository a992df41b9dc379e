use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "norm failure in realization {realization} at step {step}: |<psi|psi> - 1| = {deviation:.3e} \
         exceeds tolerance {tolerance:.3e}; reduce the time step"
    )]
    NormFailure {
        realization: usize,
        step: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("numeric error in realization {realization} at step {step}: {message}")]
    Numeric {
        realization: usize,
        step: usize,
        message: String,
    },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Index(_) => 2,
            Error::NormFailure { .. } | Error::Numeric { .. } | Error::Consistency(_) => 3,
            Error::Capacity(_) => 4,
            Error::Io(_) | Error::Format(_) => 5,
        }
    }

    /// Attach realization/step coordinates to an error raised inside a single step.
    pub(crate) fn at(self, realization: usize, step: usize) -> Self {
        match self {
            Error::NormFailure {
                deviation,
                tolerance,
                ..
            } => Error::NormFailure {
                realization,
                step,
                deviation,
                tolerance,
            },
            Error::Numeric { message, .. } => Error::Numeric {
                realization,
                step,
                message,
            },
            other => other,
        }
    }
}
