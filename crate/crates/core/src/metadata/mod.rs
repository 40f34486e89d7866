//! Client for an external scholarly-metadata service.
//!
//! Three queries are supported: title search, lookup by id, and the list of
//! papers citing an id. Responses flow through a fingerprinted on-disk cache
//! and a rate limiter. In fixture mode every query must be answered from a
//! directory of recorded responses and a miss is a hard error, which keeps
//! tests off the network.

mod backend;
mod cache;
mod client;
mod http;
mod ratelimit;
mod title;

use serde::{Deserialize, Serialize};

use crate::vector::EmbeddingVector;

pub use backend::{Corpus, CorpusBackend, CorpusPaper, MetadataBackend};
pub use cache::{fingerprint, CacheEntry, CACHE_TTL_DEFAULT_SECS};
pub use client::{ClientConfig, MetadataClient, Source};
pub use http::HttpBackend;
pub use ratelimit::{Clock, ManualClock, RateLimiter, SystemClock};
pub use title::{normalize_title, token_set_ratio, TITLE_MATCH_THRESHOLD};

/// Service-side cap on citing papers returned per query.
pub const MAX_CITATIONS_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationSnippet {
    pub cited_paper_id: String,
    pub snippet: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citation_contexts: Vec<CitationSnippet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QueryKind {
    ByTitle,
    ById,
    CitationsOf,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LookupQuery {
    pub kind: QueryKind,
    pub key: String,
    pub limit: usize,
}

impl LookupQuery {
    pub fn by_title(title: &str, limit: usize) -> Self {
        LookupQuery { kind: QueryKind::ByTitle, key: normalize_title(title), limit }
    }

    pub fn by_id(id: &str) -> Self {
        LookupQuery { kind: QueryKind::ById, key: id.trim().to_string(), limit: 1 }
    }

    pub fn citations_of(id: &str, limit: usize) -> Self {
        LookupQuery { kind: QueryKind::CitationsOf, key: id.trim().to_string(), limit }
    }

    pub fn validate(&self) -> Result<(), MetadataError> {
        if self.key.is_empty() {
            return Err(MetadataError::InvalidQuery("empty key".into()));
        }
        if self.limit == 0 {
            return Err(MetadataError::InvalidQuery("limit must be positive".into()));
        }
        if self.kind == QueryKind::CitationsOf && self.limit > MAX_CITATIONS_LIMIT {
            return Err(MetadataError::InvalidQuery(format!(
                "citation limit {} exceeds {MAX_CITATIONS_LIMIT}",
                self.limit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MetadataError {
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited by metadata service")]
    RateLimited,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("fixture miss for {kind:?} `{key}` (fingerprint {fingerprint})")]
    FixtureMiss { kind: QueryKind, key: String, fingerprint: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("cannot decode response: {0}")]
    Decode(String),
    #[error("cache storage error: {0}")]
    Storage(String),
}

impl MetadataError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, MetadataError::Network(_) | MetadataError::RateLimited)
    }

    pub fn code(&self) -> &'static str {
        match self {
            MetadataError::Network(_) => "NETWORK",
            MetadataError::RateLimited => "RATE_LIMITED",
            MetadataError::NotFound(_) => "NOT_FOUND",
            MetadataError::FixtureMiss { .. } => "FIXTURE_MISS",
            MetadataError::InvalidQuery(_) => "INVALID_QUERY",
            MetadataError::Decode(_) => "DECODE_ERROR",
            MetadataError::Storage(_) => "STORAGE_ERROR",
        }
    }
}

/// Paper lookups needed when linking citations to metadata.
pub trait PaperLookup: Send + Sync {
    fn lookup_id(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError>;
    fn lookup_title(&self, title: &str) -> Result<Option<PaperRecord>, MetadataError>;
}

/// Lookup that never finds anything, for offline linking.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoLookup;

impl PaperLookup for NoLookup {
    fn lookup_id(&self, _: &str) -> Result<Option<PaperRecord>, MetadataError> {
        Ok(None)
    }

    fn lookup_title(&self, _: &str) -> Result<Option<PaperRecord>, MetadataError> {
        Ok(None)
    }
}

/// Recency order used for citing-paper lists: newest first, unknown years
/// last, then by id.
pub fn recency_order(a: &PaperRecord, b: &PaperRecord) -> std::cmp::Ordering {
    b.year
        .unwrap_or(i32::MIN)
        .cmp(&a.year.unwrap_or(i32::MIN))
        .then_with(|| a.paper_id.cmp(&b.paper_id))
}
