use thiserror::Error;

/// Errors from the text file formats.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format version `{0}`")]
    VersionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IoError {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            line,
            message: message.into(),
        }
    }
}
