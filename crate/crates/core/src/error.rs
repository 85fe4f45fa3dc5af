use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point outside domain: {0}")]
    Domain(String),
    #[error("too close to a singular locus: {0}")]
    Singular(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mean "the caller asked for something outside an
    /// operation's hypotheses", as opposed to resource exhaustion or I/O.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_)
                | Error::Domain(_)
                | Error::Singular(_)
                | Error::Precondition(_)
                | Error::Parse(_)
        )
    }
}
