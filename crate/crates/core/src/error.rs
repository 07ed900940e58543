use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("schema error in {origin}, frame {frame}: {message}")]
    Schema {
        origin: String,
        frame: usize,
        message: String,
    },

    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("incompatible {kind} file version {found} (expected {expected})")]
    IncompatibleVersion {
        kind: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("corrupt {kind} file: {message}")]
    Corrupt { kind: &'static str, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("sequence is empty after filtering")]
    EmptySequence,

    #[error("no usable data: {0}")]
    NoData(String),

    #[error("degenerate fragment: {0}")]
    DegenerateFragment(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures caused by the data rather than the caller or the numerics.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Numerical(_) | Error::InvalidInput(_))
    }
}
