use thiserror::Error;

#[derive(Debug, Error)]
pub enum MoeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MoeError>;

pub(crate) fn ensure_dim(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(MoeError::Dimension(format!("{what}: expected {expected}, got {got}")));
    }
    Ok(())
}
