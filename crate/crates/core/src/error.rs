use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A partition would have more cells than the index type can address.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// An input lies outside the domain the operation promises to handle.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent configuration, e.g. records privatized against another partition.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    /// The statistical test has no defined outcome for the input (e.g. all differences zero).
    #[error("undefined test: {0}")]
    UndefinedTest(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
