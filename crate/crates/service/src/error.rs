use std::path::Path;

use thiserror::Error;

use cordsearch_core::ckg::KgError;
use cordsearch_core::search::SearchError;

/// Failures split by who has to act on them: `User` for bad input, missing
/// files or unknown ids, `Internal` for everything the caller cannot fix.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    User(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn user(msg: impl Into<String>) -> Self {
        Error::User(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    pub fn read(path: &Path, e: impl std::fmt::Display) -> Self {
        Error::User(format!("reading {}: {e}", path.display()))
    }

    pub fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        Error::Internal(format!("writing {}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::User(_) | Error::NotFound(_) => 1,
            Error::Internal(_) => 2,
        }
    }
}

// core errors all stem from caller-supplied data
macro_rules! user_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::User(e.to_string())
            }
        }
    )*};
}

user_error_from!(
    cordsearch_core::corpus::CorpusError,
    cordsearch_core::topics::TopicError,
    cordsearch_core::evalkit::EvalError,
    cordsearch_core::medner::NerError
);

impl From<SearchError> for Error {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::NotFound(_) | SearchError::Kg(KgError::NotFound(_)) => Error::NotFound(e.to_string()),
            e => Error::User(e.to_string()),
        }
    }
}

impl From<KgError> for Error {
    fn from(e: KgError) -> Self {
        match e {
            KgError::NotFound(_) => Error::NotFound(e.to_string()),
            e => Error::User(e.to_string()),
        }
    }
}
