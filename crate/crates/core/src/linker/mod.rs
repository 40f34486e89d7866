//! From a reader's highlight to a resolved citation context.
//!
//! The pipeline is: map the highlight into document space, find the
//! sentences it overlaps, widen them by neighbouring sentences, then parse
//! every inline citation marker in that window and resolve it against the
//! bibliography and the metadata service.

mod area;
mod context;
mod locate;
mod marker;
mod resolve;
mod viewport;

use serde::{Deserialize, Serialize};

use crate::geometry::PageRect;
use crate::metadata::MetadataError;

pub use area::{capture_area, AreaCapture};
pub use context::{expand_context, CitationContext};
pub use locate::{locate_sentences, SentenceIndex};
pub use marker::{parse_marker, CitationKey, MarkerParse, MarkerStyle};
pub use resolve::{resolve_context, ResolvedReference, UnresolvedReason};
pub use viewport::{from_document_space, to_document_space, ViewportTransform};

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.2;
pub const DEFAULT_CONTEXT_WINDOW: usize = 1;
pub const DEFAULT_MAX_IMAGE_BYTES: usize = 2 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkerConfig {
    /// Minimum intersection, as a fraction of the smaller rectangle's area.
    pub overlap_threshold: f64,
    /// Sentences taken on each side of the highlighted ones.
    pub context_window: usize,
    pub max_image_bytes: usize,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        LinkerConfig {
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            context_window: DEFAULT_CONTEXT_WINDOW,
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HighlightKind {
    Text,
    Area,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    pub doc_id: String,
    pub kind: HighlightKind,
    /// Rectangles in rendered units.
    pub rects: Vec<PageRect>,
    /// Client timestamp, milliseconds since the epoch.
    #[serde(default)]
    pub created_at: u64,
}

impl Highlight {
    pub fn text(doc_id: &str, rects: Vec<PageRect>) -> Self {
        Highlight { doc_id: doc_id.into(), kind: HighlightKind::Text, rects, created_at: 0 }
    }

    pub fn area(doc_id: &str, rect: PageRect) -> Self {
        Highlight { doc_id: doc_id.into(), kind: HighlightKind::Area, rects: vec![rect], created_at: 0 }
    }

    pub fn validate(&self, page_count: usize) -> Result<(), LinkError> {
        if self.rects.is_empty() {
            return Err(LinkError::InvalidHighlight("no rectangles".into()));
        }
        for r in &self.rects {
            if r.page as usize >= page_count {
                return Err(LinkError::UnknownPage(r.page));
            }
            if !r.rect.is_proper() {
                return Err(LinkError::InvalidHighlight(format!("degenerate rectangle {:?}", r.rect)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum LinkError {
    #[error("unknown page {0}")]
    UnknownPage(u32),
    #[error("invalid viewport transform: {0}")]
    InvalidTransform(String),
    #[error("invalid highlight: {0}")]
    InvalidHighlight(String),
    #[error("image payload of {size} bytes exceeds limit of {limit}")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("no sentences selected")]
    EmptyCore,
    #[error("unknown sentence {0}")]
    UnknownSentence(u32),
    #[error("highlight covers no sentence")]
    NothingSelected,
    #[error(transparent)]
    Metadata(#[from] MetadataError),
}

impl LinkError {
    pub fn code(&self) -> &'static str {
        match self {
            LinkError::UnknownPage(_) => "UNKNOWN_PAGE",
            LinkError::InvalidTransform(_) => "INVALID_TRANSFORM",
            LinkError::InvalidHighlight(_) => "INVALID_HIGHLIGHT",
            LinkError::PayloadTooLarge { .. } => "PAYLOAD_TOO_LARGE",
            LinkError::EmptyCore => "EMPTY_CORE",
            LinkError::UnknownSentence(_) => "UNKNOWN_SENTENCE",
            LinkError::NothingSelected => "NOTHING_SELECTED",
            LinkError::Metadata(e) => e.code(),
        }
    }
}
