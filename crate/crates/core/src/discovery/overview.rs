use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{DiscoveryError, Recommendation, RecommendationSet};
use crate::store::{build_outline, render_outline, OutlineNode, Workspace};

/// The Overview & Discovery document for one thread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overview {
    pub thread_id: String,
    /// Workspace revision of the outline.
    pub revision: u64,
    pub outline: OutlineNode,
    pub recommendations: Vec<Recommendation>,
    /// Revision the recommendations were computed at, when there are any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recommendations_revision: Option<u64>,
}

pub fn build_overview(ws: &Workspace, thread_id: &str, recs: Option<&RecommendationSet>) -> Result<Overview, DiscoveryError> {
    let outline = build_outline(ws, Some(thread_id))
        .map_err(|_| DiscoveryError::NoSuchThread(thread_id.into()))?
        .remove(0);
    let recs = recs.filter(|r| r.thread_id == thread_id);
    Ok(Overview {
        thread_id: thread_id.into(),
        revision: ws.revision,
        outline,
        recommendations: recs.map(|r| r.recommendations.clone()).unwrap_or_default(),
        recommendations_revision: recs.map(|r| r.revision),
    })
}

pub fn render_overview(o: &Overview) -> String {
    let mut out = render_outline(std::slice::from_ref(&o.outline));
    let Some(rev) = o.recommendations_revision else {
        return out;
    };
    writeln!(out, "recommendations (revision {rev}):").unwrap();
    for r in &o.recommendations {
        let year = r.candidate.year.map_or_else(|| "n.d.".to_string(), |y| y.to_string());
        write!(out, "  {}. {} ({year}) <{}> coverage {}", r.rank, r.candidate.title, r.candidate.paper_id, r.coverage.count)
            .unwrap();
        if let Some(c) = r.cosine_to_centroid {
            write!(out, " cosine {c:.3}").unwrap();
        }
        out.push('\n');
        if let Some(t) = &r.candidate.tldr {
            writeln!(out, "      tldr: {t}").unwrap();
        }
        for s in &r.candidate.citation_contexts {
            match &s.intent {
                Some(i) => writeln!(out, "      cites {} [{i}]: \"{}\"", s.cited_paper_id, s.snippet),
                None => writeln!(out, "      cites {}: \"{}\"", s.cited_paper_id, s.snippet),
            }
            .unwrap();
        }
    }
    out
}
