//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor kernels, solvers, parsers, and drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's contract (bad mode, shape mismatch, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A caller precondition does not hold (empty tensor, no labeled posts, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A symmetric positive-definite factorization failed. `block` names the
    /// factor update that was being solved when the failure surfaced, if any.
    #[error("singular system{}: smallest pivot {pivot:.6e}", block.map(|b| format!(" in {b} update")).unwrap_or_default())]
    Singular {
        /// Smallest diagonal pivot encountered before the factorization failed.
        pivot: f64,
        /// Factor update (`"A"`, `"B"`, `"C"`, `"W"`) the solve belonged to.
        block: Option<&'static str>,
    },

    /// A text input could not be parsed. Line numbers are 1-based.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("io error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Attach a factor-update name to a singularity error, leaving other
    /// variants untouched.
    pub(crate) fn in_block(self, name: &'static str) -> Self {
        match self {
            Error::Singular { pivot, .. } => Error::Singular {
                pivot,
                block: Some(name),
            },
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_message_names_block() {
        let err = Error::Singular {
            pivot: 1e-17,
            block: None,
        }
        .in_block("B");
        let msg = err.to_string();
        assert!(msg.contains("B update"), "{msg}");
        assert!(msg.contains("1.0"), "{msg}");
    }

    #[test]
    fn parse_message_carries_location() {
        let err = Error::Parse {
            path: "labels.tsv".into(),
            line: 7,
            message: "unknown label token `maybe`".into(),
        };
        assert_eq!(err.to_string(), "labels.tsv:7: unknown label token `maybe`");
    }
}
