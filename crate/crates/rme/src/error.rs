use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum RmeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] rme_core::Error),
    #[error("plugin: {0}")]
    Plugin(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("png: {0}")]
    Png(String),
}

pub type Result<T> = std::result::Result<T, RmeError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RmeError {
    let path = path.into();
    move |source| RmeError::Io { path, source }
}

pub(crate) fn format_err(msg: impl Into<String>) -> RmeError {
    RmeError::Format(msg.into())
}
