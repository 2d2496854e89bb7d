use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("stream error: {0}")]
    Stream(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("degenerate skeleton: {0}")]
    DegenerateSkeleton(String),
    #[error("logic error: {0}")]
    Logic(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("model file error: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
