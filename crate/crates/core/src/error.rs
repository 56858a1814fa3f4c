use colcert_lp::LpError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid statistics: {0}")]
    Stats(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<LpError> for Error {
    fn from(e: LpError) -> Self {
        match e {
            LpError::Capacity { .. } => {
                Error::Capacity(format!("{e}; increase quantization (fewer bins) or switch to relaxed mode"))
            }
            LpError::Malformed(m) => Error::Solver(m),
            LpError::Numerical(_) => Error::Solver(e.to_string()),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
