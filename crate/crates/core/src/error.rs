use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("proton count {protons} outside supported range 1..={max}")]
    InvalidProtonCount { protons: usize, max: usize },

    #[error("hyperfine table has {rows} rows but the model has {protons} protons")]
    HyperfineRowMismatch { rows: usize, protons: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid {key}: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("numerical abort at t = {time} (state {state}): {reason}")]
    NumericalAbort {
        time: f64,
        state: usize,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
