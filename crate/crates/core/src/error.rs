use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Parse { what: String, message: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema violation in {record}: {message}")]
    SchemaViolation { record: String, message: String },

    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),

    #[error("unknown node `{0}`")]
    MissingNode(String),

    #[error("graph must flag exactly one focal user, found {0}")]
    FocalUser(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("path enumeration for {pair} exceeded the cap of {cap} paths")]
    PathCapExceeded { pair: String, cap: usize },

    #[error("unknown path `{0}`")]
    UnknownPath(String),

    #[error("path references an edge that is not in the graph: {0}")]
    DanglingPath(String),

    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid experiment configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}
