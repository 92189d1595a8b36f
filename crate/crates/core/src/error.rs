use thiserror::Error;

#[derive(Debug, Error)]
pub enum CesarError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("variable '{name}' has a degenerate range (min = max = {value})")]
    DegenerateRange { name: String, value: f64 },

    #[error("input error: {0}")]
    Input(String),

    #[error("solver produced non-finite values at internal step {step}")]
    SolverInstability { step: usize },

    #[error("ensemble member {index} failed: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<CesarError>,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CesarError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(CesarError::Config(msg.into()))
}
