use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are grouped by category so the CLI can map them onto distinct
/// exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Shape(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("isolated joint {0}: adjacency row sums to zero")]
    IsolatedJoint(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Short category name, used for CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Config(_) => "config",
            Error::Index(_) => "index",
            Error::Numeric(_) => "numeric",
            Error::Layout(_) => "layout",
            Error::Partition(_) => "partition",
            Error::IsolatedJoint(_) => "adjacency",
            Error::InsufficientData(_) => "data",
            Error::Format { .. } => "format",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
