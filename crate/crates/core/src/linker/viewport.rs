use serde::{Deserialize, Serialize};

use super::{Highlight, LinkError};
use crate::geometry::{PageRect, Rect};

/// Maps rendered-viewer units onto document points: subtract the page's
/// offset, then divide by the render scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewportTransform {
    pub render_scale: f64,
    /// Per-page `(dx, dy)` in rendered units, indexed by page. Empty means
    /// no offsets on any page.
    #[serde(default)]
    pub page_offsets: Vec<(f64, f64)>,
}

impl ViewportTransform {
    pub fn identity(pages: usize) -> Self {
        ViewportTransform { render_scale: 1.0, page_offsets: vec![(0.0, 0.0); pages] }
    }

    pub fn scaled(render_scale: f64, pages: usize) -> Self {
        ViewportTransform { render_scale, page_offsets: vec![(0.0, 0.0); pages] }
    }

    fn check(&self) -> Result<(), LinkError> {
        if self.render_scale.is_finite() && self.render_scale > 0.0 {
            Ok(())
        } else {
            Err(LinkError::InvalidTransform(format!("render_scale must be > 0, got {}", self.render_scale)))
        }
    }

    fn offset(&self, page: u32) -> Result<(f64, f64), LinkError> {
        if self.page_offsets.is_empty() {
            return Ok((0.0, 0.0));
        }
        self.page_offsets.get(page as usize).copied().ok_or(LinkError::UnknownPage(page))
    }

    pub fn to_document(&self, r: &PageRect) -> Result<PageRect, LinkError> {
        self.check()?;
        let (dx, dy) = self.offset(r.page)?;
        let s = self.render_scale;
        Ok(PageRect::new(r.page, Rect::new((r.rect.x - dx) / s, (r.rect.y - dy) / s, r.rect.w / s, r.rect.h / s)))
    }

    pub fn to_rendered(&self, r: &PageRect) -> Result<PageRect, LinkError> {
        self.check()?;
        let (dx, dy) = self.offset(r.page)?;
        let s = self.render_scale;
        Ok(PageRect::new(r.page, Rect::new(r.rect.x * s + dx, r.rect.y * s + dy, r.rect.w * s, r.rect.h * s)))
    }
}

pub fn to_document_space(h: &Highlight, t: &ViewportTransform) -> Result<Vec<PageRect>, LinkError> {
    h.rects.iter().map(|r| t.to_document(r)).collect()
}

pub fn from_document_space(rects: &[PageRect], t: &ViewportTransform) -> Result<Vec<PageRect>, LinkError> {
    rects.iter().map(|r| t.to_rendered(r)).collect()
}
