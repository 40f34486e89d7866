//! Repair of sentences that the upstream parser split in the middle.
//!
//! Two adjacent sentences on the same page are joined when the first does not
//! end in sentence-terminal punctuation and the second starts with a lowercase
//! letter or with a citation marker. Merging folds left, so a run of fragments
//! collapses into one sentence and a second pass finds nothing to do.

use serde::Serialize;

use super::{InlineCitationMarker, ParsedDocument, SentenceSpan};

const TERMINALS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &[')', ']', '}', '"', '\'', '\u{201D}', '\u{2019}', '\u{00BB}'];

/// Which original sentences were absorbed into which predecessor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    /// `(first, absorbed)` pairs of original sentence indices.
    pub merges: Vec<(u32, u32)>,
}

impl MergeReport {
    pub fn count(&self) -> usize {
        self.merges.len()
    }
}

pub(crate) fn ends_sentence(text: &str) -> bool {
    let body = text.trim_end();
    let stripped = body.trim_end_matches(CLOSERS);
    stripped.ends_with(TERMINALS)
}

fn starts_continuation(doc: &ParsedDocument, s: &SentenceSpan) -> bool {
    let lead = s.text.chars().take_while(|c| c.is_whitespace()).count();
    if s.text.chars().nth(lead).is_some_and(char::is_lowercase) {
        return true;
    }
    doc.markers_in(s.index).any(|m| m.char_range.start == lead)
}

/// Returns the repaired document.
pub fn merge_fragmented_sentences(doc: &ParsedDocument) -> ParsedDocument {
    merge_with_report(doc).0
}

pub fn merge_with_report(doc: &ParsedDocument) -> (ParsedDocument, MergeReport) {
    let mut report = MergeReport::default();
    let mut out: Vec<SentenceSpan> = Vec::with_capacity(doc.sentences.len());
    // old index -> (new index, char shift)
    let mut remap: Vec<(u32, usize)> = Vec::with_capacity(doc.sentences.len());
    let mut head_of_run: u32 = 0;

    for s in &doc.sentences {
        let merge = match out.last() {
            Some(prev) => prev.page == s.page && !ends_sentence(&prev.text) && starts_continuation(doc, s),
            None => false,
        };
        if merge {
            let prev = out.last_mut().expect("checked above");
            let sep = if prev.text.ends_with(char::is_whitespace) || s.text.starts_with(char::is_whitespace) {
                ""
            } else {
                " "
            };
            let shift = prev.char_len() + sep.len();
            prev.text.push_str(sep);
            prev.text.push_str(&s.text);
            prev.boxes.extend(s.boxes.iter().copied());
            remap.push((prev.index, shift));
            report.merges.push((head_of_run, s.index));
        } else {
            head_of_run = s.index;
            let index = out.len() as u32;
            remap.push((index, 0));
            out.push(SentenceSpan { index, ..s.clone() });
        }
    }

    let markers = doc
        .markers
        .iter()
        .map(|m| {
            let (index, shift) = remap[m.sentence_index as usize];
            InlineCitationMarker {
                sentence_index: index,
                char_range: m.char_range.start + shift..m.char_range.end + shift,
                ..m.clone()
            }
        })
        .collect();

    let merged = ParsedDocument { sentences: out, markers, ..doc.clone() };
    debug_assert!(merged.validate().is_ok());
    (merged, report)
}
