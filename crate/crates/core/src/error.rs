use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Invalid or inconsistent configuration. `path` names the offending field.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure in {module}::{op}: {msg} (achieved error {achieved:e})")]
    Numerical {
        module: &'static str,
        op: &'static str,
        msg: String,
        achieved: f64,
    },

    /// A documented validity condition of an approximation does not hold.
    #[error("{op}: validity condition violated: {msg}")]
    Validity { op: &'static str, msg: String },

    #[error("malformed {what}: {msg}")]
    Format { what: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Process exit status for the command-line driver: 2 for configuration
    /// problems, 3 for numerical or domain failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Format { .. } => 2,
            Error::Domain { .. } | Error::Numerical { .. } | Error::Validity { .. } => 3,
            Error::Io(_) => 1,
        }
    }
}
