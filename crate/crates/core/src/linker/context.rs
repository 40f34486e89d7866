use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LinkError, ResolvedReference};
use crate::doc_model::{InlineCitationMarker, ParsedDocument};

/// Highlighted sentences, their neighbours, and the citations found there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationContext {
    pub context_id: String,
    pub doc_id: String,
    pub core_sentence_indices: Vec<u32>,
    pub context_sentence_indices: Vec<u32>,
    pub text: String,
    /// Page of the first highlighted sentence.
    pub page: u32,
    pub found_markers: Vec<InlineCitationMarker>,
    #[serde(default)]
    pub resolved: Vec<ResolvedReference>,
}

impl CitationContext {
    pub fn resolved_ref(&self, key: &str) -> Option<&ResolvedReference> {
        self.resolved.iter().find(|r| r.key == key)
    }
}

fn context_id(doc_id: &str, core: &[u32], context: &[u32]) -> String {
    let mut h = Sha256::new();
    h.update(doc_id.as_bytes());
    for (tag, list) in [("core", core), ("ctx", context)] {
        h.update(tag.as_bytes());
        for i in list {
            h.update(i.to_le_bytes());
        }
    }
    format!("ctx-{}", &hex::encode(h.finalize())[..12])
}

/// Widens `core` by up to `window` sentences before the first and after the
/// last core sentence, never crossing a section boundary or the document ends.
pub fn expand_context(doc: &ParsedDocument, core: &[u32], window: usize) -> Result<CitationContext, LinkError> {
    let core: BTreeSet<u32> = core.iter().copied().collect();
    let (Some(&first), Some(&last)) = (core.first(), core.last()) else {
        return Err(LinkError::EmptyCore);
    };
    if last as usize >= doc.sentences.len() {
        return Err(LinkError::UnknownSentence(last));
    }

    let section = |i: u32| doc.sentences[i as usize].section_index;
    let mut context = core.clone();
    let mut i = first;
    for _ in 0..window {
        if i == 0 || section(i - 1) != section(first) {
            break;
        }
        i -= 1;
        context.insert(i);
    }
    let mut j = last;
    for _ in 0..window {
        if j as usize + 1 >= doc.sentences.len() || section(j + 1) != section(last) {
            break;
        }
        j += 1;
        context.insert(j);
    }

    let core: Vec<u32> = core.into_iter().collect();
    let context: Vec<u32> = context.into_iter().collect();
    let text = context
        .iter()
        .map(|&i| doc.sentences[i as usize].text.trim())
        .collect::<Vec<_>>()
        .join(" ");
    let mut found_markers: Vec<InlineCitationMarker> = doc
        .markers
        .iter()
        .filter(|m| context.binary_search(&m.sentence_index).is_ok())
        .cloned()
        .collect();
    found_markers.sort_by_key(|m| (m.sentence_index, m.char_range.start));

    Ok(CitationContext {
        context_id: context_id(&doc.doc_id, &core, &context),
        doc_id: doc.doc_id.clone(),
        page: doc.sentences[first as usize].page,
        core_sentence_indices: core,
        context_sentence_indices: context,
        text,
        found_markers,
        resolved: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::testutil::{doc_with_sentences, mark};
    use crate::doc_model::SectionHeader;

    #[test]
    fn single_sentence_document() {
        let doc = doc_with_sentences(&["Only one."]);
        let ctx = expand_context(&doc, &[0], 1).unwrap();
        assert_eq!(ctx.context_sentence_indices, vec![0]);
        assert_eq!(ctx.text, "Only one.");
    }

    #[test]
    fn mid_section_takes_both_neighbours() {
        let texts: Vec<String> = (0..10).map(|i| format!("S{i}.")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let doc = doc_with_sentences(&refs);
        let ctx = expand_context(&doc, &[5], 1).unwrap();
        assert_eq!(ctx.context_sentence_indices, vec![4, 5, 6]);
        assert_eq!(ctx.core_sentence_indices, vec![5]);
        assert_eq!(ctx.text, "S4. S5. S6.");
        let wide = expand_context(&doc, &[5], 2).unwrap();
        assert_eq!(wide.context_sentence_indices, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn stops_at_section_boundary() {
        let mut doc = doc_with_sentences(&["A0.", "A1.", "B0.", "B1."]);
        for (i, sec) in [0, 0, 1, 1].iter().enumerate() {
            doc.sentences[i].section_index = Some(*sec);
        }
        doc.sections = (0..2)
            .map(|i| SectionHeader { index: i, page: 0, text: format!("Sec {i}"), depth: 1 })
            .collect();
        let ctx = expand_context(&doc, &[1], 1).unwrap();
        assert_eq!(ctx.context_sentence_indices, vec![0, 1]);
        let ctx = expand_context(&doc, &[1, 2], 1).unwrap();
        assert_eq!(ctx.context_sentence_indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn collects_markers_in_order_and_ids_are_stable() {
        let mut doc = doc_with_sentences(&["See [2].", "And [1] too.", "Far [3]."]);
        mark(&mut doc, 1, "[1]", None);
        mark(&mut doc, 0, "[2]", None);
        mark(&mut doc, 2, "[3]", None);
        let a = expand_context(&doc, &[0], 1).unwrap();
        let surfaces: Vec<_> = a.found_markers.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(surfaces, ["[2]", "[1]"]);
        assert_eq!(a.context_id, expand_context(&doc, &[0], 1).unwrap().context_id);
        assert_ne!(a.context_id, expand_context(&doc, &[1], 1).unwrap().context_id);
    }

    #[test]
    fn empty_or_out_of_range_core() {
        let doc = doc_with_sentences(&["x."]);
        assert_eq!(expand_context(&doc, &[], 1), Err(LinkError::EmptyCore));
        assert_eq!(expand_context(&doc, &[4], 1), Err(LinkError::UnknownSentence(4)));
    }
}
