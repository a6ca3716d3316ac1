use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A document could not be decoded; `field` is the JSON path of the offending value.
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    /// Structurally valid input that violates a model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// The requested operation does not apply to this instance or configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An enumeration guard was exceeded.
    #[error("size guard: {what} is {actual}, limit is {limit}")]
    Size {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn size_guard(what: &'static str, actual: usize, limit: usize) -> Result<()> {
        if actual > limit {
            Err(Error::Size {
                what,
                actual,
                limit,
            })
        } else {
            Ok(())
        }
    }
}
