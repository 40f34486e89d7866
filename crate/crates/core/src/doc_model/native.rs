//! The native JSON parse schema.

use serde::{Deserialize, Serialize};

use super::{
    BibEntry, DocError, InlineCitationMarker, Page, ParsedDocument, SectionHeader, SentenceSpan,
};

pub const NATIVE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BoxUnits {
    /// Multiply by `parse_scale` to obtain points.
    #[default]
    Parse,
    Points,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Origin {
    #[default]
    TopLeft,
    BottomLeft,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeParse {
    #[serde(default = "default_version")]
    version: u32,
    doc_id: String,
    #[serde(default)]
    title: String,
    parse_scale: f64,
    #[serde(default)]
    box_units: BoxUnits,
    #[serde(default)]
    origin: Origin,
    pages: Vec<Page>,
    #[serde(default)]
    sections: Vec<SectionHeader>,
    sentences: Vec<SentenceSpan>,
    #[serde(default)]
    bib: Vec<BibEntry>,
    #[serde(default)]
    markers: Vec<InlineCitationMarker>,
}

fn default_version() -> u32 {
    NATIVE_SCHEMA_VERSION
}

/// Ingests either a native JSON parse or a TEI XML export, sniffed from the
/// first non-whitespace byte.
pub fn ingest_document(raw: &[u8]) -> Result<ParsedDocument, DocError> {
    match raw.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'<') => super::import_tei(raw),
        _ => ingest_native(raw),
    }
}

pub fn ingest_native(raw: &[u8]) -> Result<ParsedDocument, DocError> {
    let de = &mut serde_json::Deserializer::from_slice(raw);
    let parse: NativeParse = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        DocError::schema(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
    })?;
    if parse.version != NATIVE_SCHEMA_VERSION {
        return Err(DocError::schema(
            "version",
            format!("unsupported version {}, expected {NATIVE_SCHEMA_VERSION}", parse.version),
        ));
    }
    from_parse(parse)
}

fn from_parse(p: NativeParse) -> Result<ParsedDocument, DocError> {
    if !(p.parse_scale.is_finite() && p.parse_scale > 0.0) {
        return Err(DocError::Invariant(format!("parse_scale must be > 0, got {}", p.parse_scale)));
    }
    let scale = match p.box_units {
        BoxUnits::Parse => p.parse_scale,
        BoxUnits::Points => 1.0,
    };

    let pages: Vec<Page> = p
        .pages
        .into_iter()
        .map(|pg| Page { width: pg.width * scale, height: pg.height * scale, ..pg })
        .collect();

    let mut sentences = p.sentences;
    for s in &mut sentences {
        for b in &mut s.boxes {
            let mut r = b.scaled(scale);
            if p.origin == Origin::BottomLeft {
                let height = pages
                    .get(s.page as usize)
                    .map(|pg| pg.height)
                    .ok_or_else(|| DocError::Invariant(format!("sentence {} is on missing page {}", s.index, s.page)))?;
                r.y = height - r.y - r.h;
            }
            *b = r;
        }
    }

    let doc = ParsedDocument {
        doc_id: p.doc_id,
        title: p.title,
        parse_scale: p.parse_scale,
        pages,
        sections: p.sections,
        sentences,
        bib_entries: p.bib,
        markers: p.markers,
    };
    doc.validate()?;
    Ok(doc)
}

/// Serializes a document in the native schema. Boxes and page sizes are
/// written in points, so re-ingesting yields an equal document.
pub fn to_native_json(doc: &ParsedDocument) -> String {
    let parse = NativeParse {
        version: NATIVE_SCHEMA_VERSION,
        doc_id: doc.doc_id.clone(),
        title: doc.title.clone(),
        parse_scale: doc.parse_scale,
        box_units: BoxUnits::Points,
        origin: Origin::TopLeft,
        pages: doc.pages.clone(),
        sections: doc.sections.clone(),
        sentences: doc.sentences.clone(),
        bib: doc.bib_entries.clone(),
        markers: doc.markers.clone(),
    };
    serde_json::to_string_pretty(&parse).expect("document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    const MINIMAL: &str = r#"{
        "doc_id": "min", "title": "Minimal", "parse_scale": 1.0,
        "pages": [{"index": 0, "width": 612, "height": 792}],
        "sentences": [{"index": 0, "page": 0, "text": "Hello world.", "boxes": [[72, 72, 100, 12]]}]
    }"#;

    #[test]
    fn minimal_document() {
        let doc = ingest_native(MINIMAL.as_bytes()).unwrap();
        assert_eq!(doc.sentences.len(), 1);
        assert_eq!(doc.markers.len(), 0);
        assert_eq!(doc.bib_entries.len(), 0);
    }

    #[test]
    fn schema_error_names_field() {
        let bad = MINIMAL.replace("\"text\": \"Hello world.\"", "\"text\": 5");
        match ingest_native(bad.as_bytes()) {
            Err(DocError::Schema { field, .. }) => assert_eq!(field, "sentences[0].text"),
            other => panic!("expected schema error, got {other:?}"),
        }
        match ingest_native(b"{\"title\": \"x\"}") {
            Err(DocError::Schema { field, message }) => {
                assert_eq!(field, "<root>");
                assert!(message.contains("doc_id"), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn marker_past_end_is_invariant_error() {
        let bad = MINIMAL.replace(
            "\"sentences\"",
            "\"markers\": [{\"sentence_index\": 99, \"char_range\": [0, 1], \"surface\": \"H\"}], \"sentences\"",
        );
        assert!(matches!(ingest_native(bad.as_bytes()), Err(DocError::Invariant(_))));
    }

    #[test]
    fn scales_and_flips_to_top_left_points() {
        let raw = MINIMAL
            .replace("\"parse_scale\": 1.0", "\"parse_scale\": 2.0, \"origin\": \"bottom-left\"")
            .replace("[72, 72, 100, 12]", "[10, 380, 50, 6]");
        let doc = ingest_native(raw.as_bytes()).unwrap();
        // page height 792 * 2 = 1584; box top = 1584 - 760 - 12
        assert_eq!(doc.pages[0].height, 1584.0);
        assert_eq!(doc.sentences[0].boxes[0], Rect::new(20.0, 812.0, 100.0, 12.0));
    }

    #[test]
    fn serialization_round_trips_after_scaling() {
        let raw = MINIMAL.replace("\"parse_scale\": 1.0", "\"parse_scale\": 0.75");
        let doc = ingest_native(raw.as_bytes()).unwrap();
        let again = ingest_native(to_native_json(&doc).as_bytes()).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn sniffing_dispatches_on_first_byte() {
        assert!(ingest_document(format!("  \n{MINIMAL}").as_bytes()).is_ok());
        assert!(matches!(ingest_document(b"  <TEI></TEI>"), Err(DocError::Invariant(_))));
    }
}
