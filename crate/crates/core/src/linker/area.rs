use serde::{Deserialize, Serialize};

use super::{Highlight, HighlightKind, LinkError};
use crate::geometry::PageRect;

/// A region clipped as an image, e.g. a figure or an equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaCapture {
    pub doc_id: String,
    pub page: u32,
    /// Region in document space.
    pub rect: PageRect,
    #[serde(skip)]
    pub image: Vec<u8>,
}

/// Accepts an area highlight whose rectangle is already in document space.
pub fn capture_area(h: &Highlight, doc_rect: PageRect, image: Vec<u8>, limit: usize) -> Result<AreaCapture, LinkError> {
    if h.kind != HighlightKind::Area {
        return Err(LinkError::InvalidHighlight("area capture needs an AREA highlight".into()));
    }
    if h.rects.len() != 1 {
        return Err(LinkError::InvalidHighlight("area highlight must have exactly one rectangle".into()));
    }
    if image.is_empty() {
        return Err(LinkError::InvalidHighlight("empty image".into()));
    }
    if image.len() > limit {
        return Err(LinkError::PayloadTooLarge { size: image.len(), limit });
    }
    Ok(AreaCapture { doc_id: h.doc_id.clone(), page: doc_rect.page, rect: doc_rect, image })
}
