use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid causal model: {0}")]
    InvalidScm(String),

    #[error("evidence X = {value} has zero probability")]
    ZeroProbabilityEvidence { value: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("inverse transform is not real: max |imag| = {max_imag:e}")]
    NonRealResult { max_imag: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch} (loss = {loss}, max |param| = {max_param})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        max_param: f64,
    },

    #[error("dataset layout error: {0}")]
    Layout(String),

    #[error("class {0} has no ground-truth instances")]
    MissingClass(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("held-out domain leak: {0}")]
    ProvenanceViolation(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidScm(_)
                | Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::InvalidImage(_)
                | Error::DimensionMismatch(_)
        )
    }
}
