use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported compiler version {found} (supported: 0.6.x - 0.8.x)")]
    UnsupportedVersion { found: String },
    #[error("cyclic inheritance involving `{0}`")]
    CyclicInheritance(String),
    #[error("`{0}` is not a recognized token transfer")]
    NotATransfer(String),
    #[error("LLM service unavailable: {0}")]
    ServiceUnavailable(String),
    #[error("malformed LLM response: {0}")]
    MalformedResponse(String),
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("compiler invocation failed: {0}")]
    Compiler(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
