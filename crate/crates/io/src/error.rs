use std::path::PathBuf;

use pics_core::PicsError;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("invalid preset catalogue: {0}")]
    InvalidCatalogue(String),
    #[error("no images found in {0}")]
    EmptyStack(PathBuf),
    #[error(transparent)]
    Core(#[from] PicsError),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the file system or file contents rather
    /// than by the engine.
    pub fn is_file_error(&self) -> bool {
        !matches!(self, IoError::Core(_) | IoError::UnknownPreset(_))
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;
