use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the toolkit. Each variant maps onto one of the
/// process exit classes used by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    #[error("schema error: column `{0}` not found")]
    MissingColumn(String),
    #[error("data error at row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("data error: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// Process exit code: 1 usage/config, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape { .. }
            | Error::Config(_)
            | Error::InvalidConfig(_)
            | Error::Usage(_)
            | Error::TomlDe(_)
            | Error::TomlSer(_) => 1,
            Error::MissingColumn(_)
            | Error::Cell { .. }
            | Error::Data(_)
            | Error::File { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::NonFinite { .. } | Error::Numeric(_) | Error::UndefinedMetric(_) => 3,
        }
    }

    pub(crate) fn file(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::File {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
