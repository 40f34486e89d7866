use serde::{Deserialize, Serialize};

use crate::doc_model::ParsedDocument;
use crate::store::{HoldingTank, PaperRef, Thread, Workspace};
use crate::suggest::Suggestion;

/// Result of a mutation: the new revision plus the operation's value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutation<T> {
    pub revision: u64,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub title: String,
    pub pages: usize,
    pub sections: usize,
    pub sentences: usize,
    pub bib_entries: usize,
    pub markers: usize,
    pub merged_fragments: usize,
}

impl DocumentSummary {
    pub fn new(doc: &ParsedDocument, merged_fragments: usize) -> Self {
        DocumentSummary {
            doc_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            pages: doc.pages.len(),
            sections: doc.sections.len(),
            sentences: doc.sentences.len(),
            bib_entries: doc.bib_entries.len(),
            markers: doc.markers.len(),
            merged_fragments,
        }
    }
}

/// A drawer row. Clips are only counted; papers are listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawerEntry {
    pub thread_id: String,
    pub label: String,
    pub depth: usize,
    pub clip_count: usize,
    pub paper_count: usize,
    /// Child threads, papers and clips anywhere below this thread.
    pub nested_count: usize,
    pub last_additive_change: u64,
    pub papers: Vec<PaperRef>,
    pub children: Vec<DrawerEntry>,
}

impl DrawerEntry {
    fn new(t: &Thread, depth: usize) -> Self {
        let descendants = t.walk().len() - 1;
        DrawerEntry {
            thread_id: t.thread_id.clone(),
            label: t.label.clone(),
            depth,
            clip_count: t.clips.len(),
            paper_count: t.papers.len(),
            nested_count: descendants + t.item_count(),
            last_additive_change: t.last_additive_change,
            papers: t.papers.clone(),
            children: t.children.iter().map(|c| DrawerEntry::new(c, depth + 1)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawerView {
    pub workspace_id: String,
    pub revision: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_paper: Option<String>,
    /// Unorganized Papers first, then the top-level threads in drawer order.
    pub threads: Vec<DrawerEntry>,
}

impl DrawerView {
    pub fn new(ws: &Workspace) -> Self {
        DrawerView {
            workspace_id: ws.workspace_id.clone(),
            revision: ws.revision,
            current_paper: ws.current_paper.clone(),
            threads: ws.drawer().into_iter().map(|t| DrawerEntry::new(t, 0)).collect(),
        }
    }

    /// Thread ids in drawer order, depth first.
    pub fn ids(&self) -> Vec<String> {
        fn visit(e: &DrawerEntry, out: &mut Vec<String>) {
            out.push(e.thread_id.clone());
            for c in &e.children {
                visit(c, out);
            }
        }
        let mut out = Vec::new();
        for e in &self.threads {
            visit(e, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TankView {
    pub revision: u64,
    pub tank: HoldingTank,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitResult {
    pub revision: u64,
    pub thread_id: String,
    pub drawer: DrawerView,
}
