use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("expected a {expected}x{expected} image, got {width}x{height}")]
    ImageSize { expected: usize, width: usize, height: usize },
    #[error("need at least two classes with two samples each: {0}")]
    TooFewClasses(String),
    #[error("degenerate training pair: {0}")]
    Degenerate(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{path}: {msg}")]
    Cache { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, BaselineError>;

impl BaselineError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
