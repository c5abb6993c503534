use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical or statistical precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input file; carries the 1-based line number when known.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A fit did not converge; the best iterate so far is attached.
    #[error("fit failed: {msg}")]
    Fit { msg: String, best: Box<crate::tcspc::DecayFit> },

    /// Input data cannot support the requested estimate at all.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
