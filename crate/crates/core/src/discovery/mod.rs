//! Paper recommendations for a thread by citation coverage.
//!
//! For every thread reference with an external id, up to
//! [`MAX_CITATIONS_LIMIT`] citing papers are fetched. A candidate's coverage
//! is the set of thread references it cites. The [`SAMPLE_SIZE`] candidates
//! with the highest coverage are kept and then ordered by recency, with
//! same-year ties broken by cosine similarity to the centroid of the thread
//! references' embeddings.

mod overview;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::metadata::{MetadataClient, MetadataError, PaperLookup, PaperRecord, MAX_CITATIONS_LIMIT};
use crate::store::{PaperRef, Thread, Workspace};
use crate::vector::{score_key, EmbeddingVector};

pub use overview::{build_overview, render_overview, Overview};

/// Candidates kept after the coverage cut.
pub const SAMPLE_SIZE: usize = 50;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DiscoveryError {
    #[error("no such thread `{0}`")]
    NoSuchThread(String),
    #[error("thread `{0}` has no references with an external paper id")]
    NoResolvedRefs(String),
    #[error(transparent)]
    Metadata(#[from] MetadataError),
}

impl DiscoveryError {
    pub fn code(&self) -> &'static str {
        match self {
            DiscoveryError::NoSuchThread(_) => "NO_SUCH_THREAD",
            DiscoveryError::NoResolvedRefs(_) => "NO_RESOLVED_REFS",
            DiscoveryError::Metadata(e) => e.code(),
        }
    }
}

/// What discovery needs from the metadata service.
pub trait CitationGraph: Send + Sync {
    fn citations_of(&self, paper_id: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError>;
    fn paper(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError>;
}

impl CitationGraph for MetadataClient {
    fn citations_of(&self, paper_id: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        MetadataClient::citations_of(self, paper_id, limit)
    }

    fn paper(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError> {
        self.lookup_id(paper_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageScore {
    pub candidate: String,
    /// Thread reference ids cited by the candidate.
    pub covered: BTreeSet<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub record: PaperRecord,
    pub coverage: CoverageScore,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Coverage {
    /// Reference ids that were queried.
    pub references: Vec<String>,
    pub candidates: BTreeMap<String, Candidate>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rank: usize,
    pub candidate: PaperRecord,
    pub coverage: CoverageScore,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine_to_centroid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSet {
    pub thread_id: String,
    /// Workspace revision the set was computed at.
    pub revision: u64,
    pub references: Vec<String>,
    pub recommendations: Vec<Recommendation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// External ids of the thread's own papers, in filing order.
pub fn reference_ids(thread: &Thread) -> Vec<String> {
    let mut seen = BTreeSet::new();
    thread
        .papers
        .iter()
        .filter_map(|p| p.paper_id.as_deref().map(str::trim).filter(|s| !s.is_empty()))
        .filter(|id| seen.insert(id.to_string()))
        .map(str::to_string)
        .collect()
}

fn in_thread(thread: &Thread, record: &PaperRecord) -> bool {
    let probe = PaperRef { paper_id: Some(record.paper_id.clone()), ..Default::default() };
    let by_title = PaperRef::with_title(&record.title);
    [probe.identity(), by_title.identity()].into_iter().flatten().any(|id| thread.has_paper(&id))
}

/// Aggregates citing papers over the thread's references. Fetch failures for
/// single references become warnings; a fixture miss is an error.
pub fn collect_citing(thread: &Thread, graph: &dyn CitationGraph) -> Result<Coverage, DiscoveryError> {
    let references = reference_ids(thread);
    if references.is_empty() {
        return Err(DiscoveryError::NoResolvedRefs(thread.thread_id.clone()));
    }
    let mut cov = Coverage { references: references.clone(), ..Default::default() };
    for r in &references {
        let citing = match graph.citations_of(r, MAX_CITATIONS_LIMIT) {
            Ok(c) => c,
            Err(e @ MetadataError::FixtureMiss { .. }) => return Err(e.into()),
            Err(e) => {
                warn!(reference = %r, error = %e, "citation fetch failed");
                cov.warnings.push(format!("{r}: {} {e}", e.code()));
                continue;
            }
        };
        for record in citing.into_iter().take(MAX_CITATIONS_LIMIT) {
            if in_thread(thread, &record) {
                continue;
            }
            let entry = cov.candidates.entry(record.paper_id.clone()).or_insert_with(|| Candidate {
                coverage: CoverageScore { candidate: record.paper_id.clone(), covered: BTreeSet::new(), count: 0 },
                record: record.clone(),
            });
            entry.coverage.covered.insert(r.clone());
            entry.coverage.count = entry.coverage.covered.len();
        }
    }
    Ok(cov)
}

/// Mean embedding of the references that have one (matching the first
/// embedding's dimension).
pub fn reference_centroid(references: &[String], graph: &dyn CitationGraph) -> Result<Option<EmbeddingVector>, DiscoveryError> {
    let mut vectors: Vec<EmbeddingVector> = Vec::new();
    for r in references {
        match graph.paper(r) {
            Ok(Some(PaperRecord { embedding: Some(e), .. })) if e.is_finite() && !e.is_zero() => {
                if vectors.first().is_none_or(|f| f.dim() == e.dim()) {
                    vectors.push(e);
                }
            }
            Ok(_) => {}
            Err(e @ MetadataError::FixtureMiss { .. }) => return Err(e.into()),
            Err(e) => warn!(reference = %r, error = %e, "reference lookup failed"),
        }
    }
    Ok(EmbeddingVector::mean(&vectors))
}

fn year_key(y: Option<i32>) -> i64 {
    y.map_or(i64::MIN, i64::from)
}

/// Coverage cut to [`SAMPLE_SIZE`], then recency order with cosine
/// tie-breaks.
pub fn rank_recommendations(candidates: &BTreeMap<String, Candidate>, centroid: Option<&EmbeddingVector>) -> Vec<Recommendation> {
    let mut pool: Vec<&Candidate> = candidates.values().collect();
    pool.sort_by(|a, b| {
        b.coverage
            .count
            .cmp(&a.coverage.count)
            .then(year_key(b.record.year).cmp(&year_key(a.record.year)))
            .then_with(|| a.record.paper_id.cmp(&b.record.paper_id))
    });
    pool.truncate(SAMPLE_SIZE);

    let mut scored: Vec<(&Candidate, Option<f64>)> = pool
        .into_iter()
        .map(|c| {
            let cos = centroid.and_then(|m| c.record.embedding.as_ref().and_then(|e| e.cosine(m)));
            (c, cos)
        })
        .collect();
    scored.sort_by(|(a, ca), (b, cb)| {
        year_key(b.record.year)
            .cmp(&year_key(a.record.year))
            .then(cb.is_some().cmp(&ca.is_some()))
            .then(cb.map(score_key).cmp(&ca.map(score_key)))
            .then_with(|| a.record.paper_id.cmp(&b.record.paper_id))
    });
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (c, cos))| Recommendation {
            rank: i + 1,
            candidate: c.record.clone(),
            coverage: c.coverage.clone(),
            cosine_to_centroid: cos,
        })
        .collect()
}

/// Recomputes recommendations for a thread against its current references.
pub fn refresh(ws: &Workspace, thread_id: &str, graph: &dyn CitationGraph) -> Result<RecommendationSet, DiscoveryError> {
    let thread = ws.thread(thread_id).ok_or_else(|| DiscoveryError::NoSuchThread(thread_id.into()))?;
    let cov = collect_citing(thread, graph)?;
    let centroid = reference_centroid(&cov.references, graph)?;
    Ok(RecommendationSet {
        thread_id: thread_id.into(),
        revision: ws.revision,
        recommendations: rank_recommendations(&cov.candidates, centroid.as_ref()),
        references: cov.references,
        warnings: cov.warnings,
    })
}

/// Paper reference for adding a recommendation to a thread.
pub fn recommendation_paper(r: &Recommendation) -> PaperRef {
    PaperRef {
        paper_id: Some(r.candidate.paper_id.clone()),
        title: Some(r.candidate.title.clone()).filter(|t| !t.is_empty()),
        year: r.candidate.year,
        tldr: r.candidate.tldr.clone(),
        url: r.candidate.url.clone(),
        source_context: None,
        surface: None,
    }
}

/// Lets a [`CitationGraph`] stand in for title/id lookups.
pub struct GraphLookup<'a>(pub &'a dyn CitationGraph);

impl PaperLookup for GraphLookup<'_> {
    fn lookup_id(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError> {
        self.0.paper(paper_id)
    }

    fn lookup_title(&self, _: &str) -> Result<Option<PaperRecord>, MetadataError> {
        Ok(None)
    }
}
