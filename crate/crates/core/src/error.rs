use std::io;
use std::path::PathBuf;

use ltsp_tensor::TensorError;
use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

/// Coarse failure classes; the numeric value is the CLI exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Config = 1,
    Io = 2,
    Shape = 3,
    Numeric = 4,
}

impl ErrorCategory {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Io => "io",
            ErrorCategory::Shape => "shape",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

/// Malformed on-disk artifacts.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic, expected {expected:?}")]
    BadMagic { expected: &'static str },
    #[error("payload holds {found} bytes, header implies {expected}")]
    PayloadMismatch { expected: usize, found: usize },
    #[error("unknown element kind {0:?}")]
    UnknownKind(String),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(String),
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },

    #[error("config: {0}")]
    Config(String),

    #[error("shape: {0}")]
    Shape(String),

    #[error("numeric: {0}")]
    Numeric(String),

    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, source: FormatError) -> Self {
        CoreError::Format {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            CoreError::Io { .. } | CoreError::Format { .. } => ErrorCategory::Io,
            CoreError::Config(_) => ErrorCategory::Config,
            CoreError::Shape(_) => ErrorCategory::Shape,
            CoreError::Numeric(_) => ErrorCategory::Numeric,
            CoreError::Tensor(TensorError::InvalidConfig(_)) => ErrorCategory::Config,
            CoreError::Tensor(_) => ErrorCategory::Shape,
        }
    }
}
