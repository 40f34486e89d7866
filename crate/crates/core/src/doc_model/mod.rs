//! Canonical structured-document model.
//!
//! A [`ParsedDocument`] is the engine's view of one paper after an upstream
//! parser has split it into pages, sentences with bounding boxes, section
//! headers, bibliography entries and inline citation markers. Documents are
//! immutable once validated; all coordinates are in points with a top-left
//! origin.

mod merge;
mod native;
mod tei;

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::geometry::Rect;

pub use merge::{merge_fragmented_sentences, merge_with_report, MergeReport};
pub use native::{ingest_document, ingest_native, to_native_json, NATIVE_SCHEMA_VERSION};
pub use tei::import_tei;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DocError {
    /// Input is not a well-formed parse; `field` is the path of the first offending field.
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl DocError {
    pub fn code(&self) -> &'static str {
        match self {
            DocError::Schema { .. } => "SCHEMA_ERROR",
            DocError::Invariant(_) => "INVARIANT_ERROR",
        }
    }

    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        DocError::Schema { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub index: u32,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionHeader {
    pub index: u32,
    pub page: u32,
    pub text: String,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub index: u32,
    pub page: u32,
    pub text: String,
    pub boxes: Vec<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_index: Option<u32>,
}

impl SentenceSpan {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BibEntry {
    pub bib_key: String,
    /// Label as printed in the reference list (`"3"` for `[3]`). When absent,
    /// numeric markers fall back to the entry's 1-based position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_paper_id: Option<String>,
}

/// An inline citation as printed in a sentence. `char_range` counts Unicode
/// scalar values, not bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InlineCitationMarker {
    pub sentence_index: u32,
    #[serde(with = "range_pair")]
    pub char_range: Range<usize>,
    pub surface: String,
    /// Upstream link to a bibliography entry, when the parser produced one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bib_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub doc_id: String,
    pub title: String,
    pub parse_scale: f64,
    pub pages: Vec<Page>,
    pub sections: Vec<SectionHeader>,
    pub sentences: Vec<SentenceSpan>,
    #[serde(rename = "bib")]
    pub bib_entries: Vec<BibEntry>,
    pub markers: Vec<InlineCitationMarker>,
}

impl ParsedDocument {
    pub fn sentence(&self, index: u32) -> Option<&SentenceSpan> {
        self.sentences.get(index as usize)
    }

    pub fn has_page(&self, page: u32) -> bool {
        (page as usize) < self.pages.len()
    }

    pub fn bib(&self, key: &str) -> Option<&BibEntry> {
        self.bib_entries.iter().find(|b| b.bib_key == key)
    }

    /// Markers located in `sentence`, in text order.
    pub fn markers_in(&self, sentence: u32) -> impl Iterator<Item = &InlineCitationMarker> {
        self.markers.iter().filter(move |m| m.sentence_index == sentence)
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<(), DocError> {
        let inv = |msg: String| Err(DocError::Invariant(msg));

        if self.doc_id.trim().is_empty() {
            return inv("doc_id is empty".into());
        }
        if !(self.parse_scale.is_finite() && self.parse_scale > 0.0) {
            return inv(format!("parse_scale must be > 0, got {}", self.parse_scale));
        }
        if self.sentences.is_empty() {
            return inv("document has no sentences".into());
        }
        for (i, p) in self.pages.iter().enumerate() {
            if p.index as usize != i {
                return inv(format!("pages[{i}].index is {}, expected {i}", p.index));
            }
            if !(p.width > 0.0 && p.height > 0.0) {
                return inv(format!("pages[{i}] has non-positive size"));
            }
        }
        for (i, s) in self.sections.iter().enumerate() {
            if s.index as usize != i {
                return inv(format!("sections[{i}].index is {}, expected {i}", s.index));
            }
            if s.depth < 1 {
                return inv(format!("sections[{i}].depth must be >= 1"));
            }
            if !self.has_page(s.page) {
                return inv(format!("sections[{i}] is on missing page {}", s.page));
            }
        }

        let mut prev_page = 0;
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index as usize != i {
                return inv(format!("sentences[{i}].index is {}, expected {i}", s.index));
            }
            if !self.has_page(s.page) {
                return inv(format!("sentences[{i}] is on missing page {}", s.page));
            }
            if s.page < prev_page {
                return inv(format!("sentences[{i}] breaks page order"));
            }
            prev_page = s.page;
            if s.text.trim().is_empty() {
                return inv(format!("sentences[{i}] has empty text"));
            }
            if s.boxes.is_empty() {
                return inv(format!("sentences[{i}] has no boxes"));
            }
            if let Some(j) = s.boxes.iter().position(|b| !b.is_proper()) {
                return inv(format!("sentences[{i}].boxes[{j}] is degenerate"));
            }
            if let Some(sec) = s.section_index {
                if sec as usize >= self.sections.len() {
                    return inv(format!("sentences[{i}] references missing section {sec}"));
                }
            }
        }

        let mut keys = HashSet::new();
        let max_year = current_year() + 1;
        for (i, b) in self.bib_entries.iter().enumerate() {
            if !keys.insert(b.bib_key.as_str()) {
                return inv(format!("duplicate bib_key `{}`", b.bib_key));
            }
            if let Some(y) = b.year {
                if !(1500..=max_year).contains(&y) {
                    return inv(format!("bib[{i}].year {y} outside 1500..={max_year}"));
                }
            }
        }

        for (i, m) in self.markers.iter().enumerate() {
            let Some(s) = self.sentence(m.sentence_index) else {
                return inv(format!(
                    "markers[{i}] points at sentence {} but there are {} sentences",
                    m.sentence_index,
                    self.sentences.len()
                ));
            };
            if m.char_range.start >= m.char_range.end || m.char_range.end > s.char_len() {
                return inv(format!("markers[{i}].char_range out of sentence bounds"));
            }
            if char_slice(&s.text, m.char_range.clone()) != m.surface {
                return inv(format!("markers[{i}].surface does not match sentence text"));
            }
        }
        Ok(())
    }
}

/// `Range<usize>` as a `[start, end]` pair.
mod range_pair {
    use std::ops::Range;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Range<usize>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([r.start, r.end])
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Range<usize>, D::Error> {
        let [start, end] = <[usize; 2]>::deserialize(d)?;
        Ok(start..end)
    }
}

/// Substring by Unicode scalar offsets. Out-of-range ends are clamped.
pub fn char_slice(text: &str, range: Range<usize>) -> &str {
    let mut idx = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let start = idx.by_ref().nth(range.start).unwrap_or(text.len());
    let end = if range.end > range.start {
        idx.nth(range.end - range.start - 1).unwrap_or(text.len())
    } else {
        start
    };
    &text[start..end]
}

pub(crate) fn current_year() -> i32 {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    // mean Gregorian year
    1970 + (secs / 31_556_952) as i32
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn char_slice_handles_multibyte() {
        assert_eq!(char_slice("Müller [3].", 7..10), "[3]");
        assert_eq!(char_slice("abc", 1..3), "bc");
        assert_eq!(char_slice("abc", 2..2), "");
    }

    #[test]
    fn marker_past_sentence_list_is_invariant_error() {
        let mut doc = doc_with_sentences(&["a", "b", "c", "d", "e"]);
        doc.markers.push(InlineCitationMarker {
            sentence_index: 99,
            char_range: 0..1,
            surface: "a".into(),
            bib_key: None,
        });
        assert!(matches!(doc.validate(), Err(DocError::Invariant(_))));
    }

    #[test]
    fn surface_mismatch_rejected() {
        let mut doc = doc_with_sentences(&["See [1] here."]);
        doc.markers.push(InlineCitationMarker {
            sentence_index: 0,
            char_range: 0..3,
            surface: "[1]".into(),
            bib_key: None,
        });
        assert!(doc.validate().is_err());
        doc.markers.clear();
        mark(&mut doc, 0, "[1]", None);
        doc.validate().unwrap();
    }

    #[test]
    fn implausible_year_rejected() {
        let mut doc = doc_with_sentences(&["x"]);
        doc.bib_entries.push(BibEntry {
            bib_key: "b0".into(),
            label: None,
            raw_text: "Old, 1200".into(),
            title: None,
            year: Some(1200),
            resolved_paper_id: None,
        });
        assert!(doc.validate().is_err());
    }

    #[test]
    fn duplicate_bib_key_rejected() {
        let mut doc = doc_with_sentences(&["x"]);
        let b = BibEntry {
            bib_key: "b0".into(),
            label: None,
            raw_text: "A".into(),
            title: None,
            year: None,
            resolved_paper_id: None,
        };
        doc.bib_entries = vec![b.clone(), b];
        assert!(doc.validate().is_err());
    }
}
