use std::collections::BTreeSet;

use crate::doc_model::ParsedDocument;
use crate::geometry::{PageRect, Rect};

/// Sentence boxes bucketed by page and sorted by top edge, for locating the
/// sentences under a set of rectangles without scanning every box.
#[derive(Debug, Clone)]
pub struct SentenceIndex {
    pages: Vec<PageBoxes>,
}

#[derive(Debug, Clone, Default)]
struct PageBoxes {
    /// `(box, sentence)` sorted by `box.y`.
    boxes: Vec<(Rect, u32)>,
    max_height: f64,
}

impl SentenceIndex {
    pub fn new(doc: &ParsedDocument) -> Self {
        let mut pages = vec![PageBoxes::default(); doc.pages.len()];
        for s in &doc.sentences {
            let bucket = &mut pages[s.page as usize];
            for b in &s.boxes {
                bucket.boxes.push((*b, s.index));
                bucket.max_height = bucket.max_height.max(b.h);
            }
        }
        for p in &mut pages {
            p.boxes.sort_by(|a, b| a.0.y.total_cmp(&b.0.y));
        }
        SentenceIndex { pages }
    }

    /// Sentences with a box overlapping some rect by at least `threshold` of
    /// the smaller of the two areas, in reading order.
    pub fn locate(&self, rects: &[PageRect], threshold: f64) -> Vec<u32> {
        let mut hits = BTreeSet::new();
        for pr in rects {
            let Some(page) = self.pages.get(pr.page as usize) else { continue };
            let r = pr.rect;
            let from = page.boxes.partition_point(|(b, _)| b.y < r.y - page.max_height);
            for (b, sentence) in page.boxes[from..].iter().take_while(|(b, _)| b.y < r.bottom()) {
                if hits.contains(sentence) {
                    continue;
                }
                let inter = b.intersection_area(&r);
                if inter > 0.0 && inter >= threshold * b.area().min(r.area()) {
                    hits.insert(*sentence);
                }
            }
        }
        hits.into_iter().collect()
    }
}

pub fn locate_sentences(doc: &ParsedDocument, rects: &[PageRect], threshold: f64) -> Vec<u32> {
    SentenceIndex::new(doc).locate(rects, threshold)
}
