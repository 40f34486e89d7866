//! Plain-text renderings for terminal output.

use std::fmt::Write;

use threadloom_core::discovery::RecommendationSet;
use threadloom_core::engine::{DocumentSummary, DrawerEntry, DrawerView, TankView};
use threadloom_core::store::TankContent;
use threadloom_core::suggest::Suggestion;

pub fn summary(s: &DocumentSummary) -> String {
    format!(
        "{}: {} pages, {} sentences, {} markers, {} bibliography entries ({} fragments merged)",
        s.doc_id, s.pages, s.sentences, s.markers, s.bib_entries, s.merged_fragments
    )
}

pub fn tank(t: &TankView) -> String {
    let mut out = String::new();
    match &t.tank.content {
        None => out.push_str("tank is empty\n"),
        Some(TankContent::Image { doc_id, rect, image_sha256 }) => {
            writeln!(out, "image from {doc_id} p.{} {:?} sha256 {image_sha256}", rect.page + 1, rect.rect).unwrap();
        }
        Some(TankContent::Context { context }) => {
            writeln!(out, "context {} ({} p.{}):", context.context_id, context.doc_id, context.page + 1).unwrap();
            writeln!(out, "  {}", context.text).unwrap();
            for r in &context.resolved {
                let mark = if t.tank.selected.contains(&r.key) { "x" } else { " " };
                write!(out, "  [{mark}] {} {}", r.key, r.marker.surface).unwrap();
                match (&r.paper, &r.bib) {
                    (Some(p), _) => write!(out, " {} <{}>", p.title, p.paper_id).unwrap(),
                    (None, Some(b)) => write!(out, " {}", b.title.as_deref().unwrap_or(&b.raw_text)).unwrap(),
                    _ => {}
                }
                if let Some(reason) = &r.reason {
                    write!(out, " ({})", serde_json::to_value(reason).unwrap().as_str().unwrap_or("")).unwrap();
                }
                out.push('\n');
            }
        }
    }
    if !t.suggestions.is_empty() {
        out.push_str("suggested threads:\n");
        out.push_str(&suggestions(&t.suggestions));
    }
    out
}

pub fn suggestions(s: &[Suggestion]) -> String {
    let mut out = String::new();
    for (i, s) in s.iter().enumerate() {
        writeln!(out, "  {}. {} [{}] similarity {:.3} objective {:.3}", i + 1, s.label, s.thread_id, s.similarity, s.objective)
            .unwrap();
    }
    out
}

fn entry(out: &mut String, e: &DrawerEntry, current: Option<&str>) {
    let pad = "  ".repeat(e.depth);
    writeln!(
        out,
        "{pad}{} {}  ({} clips, {} papers, {} nested)",
        e.thread_id, e.label, e.clip_count, e.paper_count, e.nested_count
    )
    .unwrap();
    for p in &e.papers {
        let id = p.identity();
        let badge = if id.is_some() && id.as_deref() == current { " *" } else { "" };
        writeln!(out, "{pad}    - {}{badge}", p.display_title()).unwrap();
    }
    for c in &e.children {
        entry(out, c, current);
    }
}

pub fn drawer(d: &DrawerView) -> String {
    let mut out = format!("workspace {} at revision {}\n", d.workspace_id, d.revision);
    for e in &d.threads {
        entry(&mut out, e, d.current_paper.as_deref());
    }
    out
}

pub fn recommendations(s: &RecommendationSet) -> String {
    let mut out = format!("recommendations for {} (revision {}):\n", s.thread_id, s.revision);
    for r in &s.recommendations {
        let year = r.candidate.year.map_or_else(|| "n.d.".to_string(), |y| y.to_string());
        write!(out, "  {}. {} ({year}) <{}> coverage {}", r.rank, r.candidate.title, r.candidate.paper_id, r.coverage.count)
            .unwrap();
        if let Some(c) = r.cosine_to_centroid {
            write!(out, " cosine {c:.3}").unwrap();
        }
        out.push('\n');
    }
    for w in &s.warnings {
        writeln!(out, "  warning: {w}").unwrap();
    }
    out
}
