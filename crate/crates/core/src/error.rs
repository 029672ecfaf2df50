use std::io;

use thiserror::Error;

/// Vertex namespace used in graph errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexKind {
    Content,
    Tag,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::Content => "content",
            VertexKind::Tag => "tag",
        }
    }
}

impl std::fmt::Display for VertexKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate {kind} `{id}`")]
    DuplicateVertex { kind: VertexKind, id: String },

    #[error("tag name `{name}` already used by `{existing}`")]
    DuplicateTagName { name: String, existing: String },

    #[error("unknown {kind} `{id}`")]
    UnknownVertex { kind: VertexKind, id: String },

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend `{0}` does not report token scores")]
    UnsupportedBackend(String),

    #[error("yes/no token scores unavailable: {0}")]
    ScoreUnavailable(String),

    #[error("generation failed: {0}")]
    GenerationFailed(String),

    #[error("invalid record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("corrupt snapshot (line {line}): {message}")]
    CorruptSnapshot { line: usize, message: String },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn unknown(kind: VertexKind, id: impl Into<String>) -> Self {
        Error::UnknownVertex {
            kind,
            id: id.into(),
        }
    }

    /// Transport-level failures may succeed on a later attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::BackendUnavailable(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
