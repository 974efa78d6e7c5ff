use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("transform length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("split-step propagation produced a non-finite field in segment {segment}")]
    Blowup { segment: usize },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    TrainingDiverged {
        epoch: usize,
        loss: f64,
        /// `(epoch, loss)` pairs recorded before the abort.
        history: Vec<(usize, f64)>,
    },

    #[error("coefficient fit diverged after {iterations} iterations (loss {loss:e})")]
    FitDiverged { iterations: usize, loss: f64 },

    #[error("unknown parameter point: {0}")]
    UnknownParameter(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Blowup { .. }
                | Error::NonFinite(_)
                | Error::TrainingDiverged { .. }
                | Error::FitDiverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
