use thiserror::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths of two related values disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input violates a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    /// A numeric argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The input uses a feature this implementation does not support.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Dataset files disagree with each other (e.g. label named in the
    /// XML header is missing from the ARFF).
    #[error("schema error: {0}")]
    Schema(String),

    /// A label vector was queried that is not in the candidate set.
    #[error("label vector is not in the candidate set")]
    NotEmbeddable,

    /// A matrix factorization or inversion failed.
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    /// A model file was written by an incompatible format version.
    #[error("incompatible model file: found version {found}, supported version {supported}")]
    Version { found: u64, supported: u64 },

    /// A model file is structurally damaged.
    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
