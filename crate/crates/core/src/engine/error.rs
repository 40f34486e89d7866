use crate::discovery::DiscoveryError;
use crate::doc_model::DocError;
use crate::linker::LinkError;
use crate::metadata::MetadataError;
use crate::store::StoreError;
use crate::suggest::SuggestError;

/// Broad classes of failure, used to pick HTTP statuses and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Conflict,
    NotFound,
    Invalid,
    TooLarge,
    Upstream,
    Internal,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Doc(#[from] DocError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Suggest(#[from] SuggestError),
    #[error("no such document `{0}`")]
    NoSuchDocument(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn metadata_kind(e: &MetadataError) -> ErrorKind {
    match e {
        MetadataError::NotFound(_) => ErrorKind::NotFound,
        MetadataError::InvalidQuery(_) => ErrorKind::Invalid,
        MetadataError::FixtureMiss { .. } | MetadataError::Storage(_) => ErrorKind::Internal,
        _ => ErrorKind::Upstream,
    }
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Doc(e) => e.code(),
            EngineError::Link(e) => e.code(),
            EngineError::Store(e) => e.code(),
            EngineError::Metadata(e) => e.code(),
            EngineError::Discovery(e) => e.code(),
            EngineError::Suggest(e) => e.code(),
            EngineError::NoSuchDocument(_) => "NO_SUCH_DOCUMENT",
            EngineError::InvalidRequest(_) => "INVALID_REQUEST",
            EngineError::Config(_) => "CONFIG_ERROR",
            EngineError::Io(_) => "IO_ERROR",
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            EngineError::Store(StoreError::Conflict { .. }) => ErrorKind::Conflict,
            EngineError::Store(StoreError::NoSuchThread(_) | StoreError::NoSuchClip(_) | StoreError::NoSuchPaper { .. })
            | EngineError::Discovery(DiscoveryError::NoSuchThread(_))
            | EngineError::Link(LinkError::UnknownSentence(_))
            | EngineError::NoSuchDocument(_) => ErrorKind::NotFound,
            EngineError::Store(StoreError::Storage(_) | StoreError::Invariant(_)) => ErrorKind::Internal,
            EngineError::Link(LinkError::PayloadTooLarge { .. }) => ErrorKind::TooLarge,
            EngineError::Link(LinkError::Metadata(e))
            | EngineError::Metadata(e)
            | EngineError::Discovery(DiscoveryError::Metadata(e)) => metadata_kind(e),
            EngineError::Config(_) | EngineError::Io(_) | EngineError::Suggest(_) => ErrorKind::Internal,
            _ => ErrorKind::Invalid,
        }
    }
}
