//! Indented outline of a thread subtree: clips first, then references
//! grouped by the citation context they came from, ungrouped ones last.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{Clip, ClipKind, ContextSummary, PaperRef, StoreError, Thread, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlineContextGroup {
    pub context_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<ContextSummary>,
    pub papers: Vec<PaperRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlineNode {
    pub thread_id: String,
    pub label: String,
    pub depth: usize,
    pub clips: Vec<Clip>,
    pub context_groups: Vec<OutlineContextGroup>,
    pub ungrouped: Vec<PaperRef>,
    pub children: Vec<OutlineNode>,
}

fn node(ws: &Workspace, t: &Thread, depth: usize) -> OutlineNode {
    let mut groups: Vec<OutlineContextGroup> = Vec::new();
    let mut ungrouped = Vec::new();
    for p in &t.papers {
        match &p.source_context {
            Some(cid) => match groups.iter_mut().find(|g| &g.context_id == cid) {
                Some(g) => g.papers.push(p.clone()),
                None => groups.push(OutlineContextGroup {
                    context_id: cid.clone(),
                    summary: ws.contexts.get(cid).cloned(),
                    papers: vec![p.clone()],
                }),
            },
            None => ungrouped.push(p.clone()),
        }
    }
    OutlineNode {
        thread_id: t.thread_id.clone(),
        label: t.label.clone(),
        depth,
        clips: t.clips.clone(),
        context_groups: groups,
        ungrouped,
        children: t.children.iter().map(|c| node(ws, c, depth + 1)).collect(),
    }
}

/// Outline of one thread, or of the whole drawer when `thread_id` is `None`.
pub fn build_outline(ws: &Workspace, thread_id: Option<&str>) -> Result<Vec<OutlineNode>, StoreError> {
    match thread_id {
        Some(id) => {
            let t = ws.thread(id).ok_or_else(|| StoreError::NoSuchThread(id.into()))?;
            Ok(vec![node(ws, t, 0)])
        }
        None => Ok(ws.drawer().into_iter().map(|t| node(ws, t, 0)).collect()),
    }
}

fn paper_line(p: &PaperRef) -> String {
    let mut s = String::new();
    if let Some(surface) = &p.surface {
        s.push_str(surface);
        s.push(' ');
    }
    s.push_str(p.display_title());
    if let Some(y) = p.year {
        write!(s, " ({y})").unwrap();
    }
    if let Some(id) = &p.paper_id {
        write!(s, " <{id}>").unwrap();
    }
    s
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn render_node(n: &OutlineNode, out: &mut String) {
    let pad = "  ".repeat(n.depth);
    let item = format!("{pad}    ");
    writeln!(out, "{pad}- {} [{}]", n.label, n.thread_id).unwrap();
    for c in &n.clips {
        let src = format!("{} p.{}", c.source.doc_id, c.source.page + 1);
        match c.kind {
            ClipKind::Text => {
                writeln!(out, "{item}clip {} ({src}): \"{}\"", c.clip_id, one_line(c.text.as_deref().unwrap_or("")))
            }
            ClipKind::Image => {
                let sha = c.image_sha256.as_deref().unwrap_or("");
                writeln!(out, "{item}clip {} ({src}): image {}", c.clip_id, &sha[..sha.len().min(12)])
            }
        }
        .unwrap();
    }
    for g in &n.context_groups {
        match &g.summary {
            Some(s) => writeln!(out, "{item}context {} ({} p.{}): \"{}\"", g.context_id, s.doc_id, s.page + 1, one_line(&s.text)),
            None => writeln!(out, "{item}context {}", g.context_id),
        }
        .unwrap();
        for p in &g.papers {
            writeln!(out, "{item}  - {}", paper_line(p)).unwrap();
        }
    }
    if !n.ungrouped.is_empty() {
        writeln!(out, "{item}references:").unwrap();
        for p in &n.ungrouped {
            writeln!(out, "{item}  - {}", paper_line(p)).unwrap();
        }
    }
    for c in &n.children {
        render_node(c, out);
    }
}

pub fn render_outline(nodes: &[OutlineNode]) -> String {
    let mut out = String::new();
    for n in nodes {
        render_node(n, &mut out);
    }
    out
}
