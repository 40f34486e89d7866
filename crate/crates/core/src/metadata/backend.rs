//! Backend adapter contract and an in-memory corpus implementation.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{recency_order, token_set_ratio, MetadataError, PaperRecord};

/// The three service endpoints the client needs.
pub trait MetadataBackend: Send + Sync {
    /// Candidates for a normalized title, best first.
    fn search_title(&self, title: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError>;
    fn paper(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError>;
    /// Papers citing `paper_id`; `NotFound` for unknown ids.
    fn citations(&self, paper_id: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPaper {
    #[serde(flatten)]
    pub record: PaperRecord,
    /// Ids of papers this one cites.
    #[serde(default)]
    pub cites: Vec<String>,
}

/// A local set of papers and citation edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub papers: Vec<CorpusPaper>,
}

impl Corpus {
    pub fn load(path: &Path) -> Result<Corpus, MetadataError> {
        let bytes = std::fs::read(path).map_err(|e| MetadataError::Storage(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| MetadataError::Decode(format!("{}: {e}", path.display())))
    }
}

/// Serves every query from a [`Corpus`] held in memory.
#[derive(Debug, Clone)]
pub struct CorpusBackend {
    papers: HashMap<String, PaperRecord>,
    citers: HashMap<String, Vec<String>>,
    order: Vec<String>,
}

impl CorpusBackend {
    pub fn new(corpus: Corpus) -> Self {
        let mut papers = HashMap::new();
        let mut citers: HashMap<String, Vec<String>> = HashMap::new();
        let mut order = Vec::new();
        for p in corpus.papers {
            for cited in &p.cites {
                citers.entry(cited.clone()).or_default().push(p.record.paper_id.clone());
            }
            order.push(p.record.paper_id.clone());
            papers.insert(p.record.paper_id.clone(), p.record);
        }
        CorpusBackend { papers, citers, order }
    }
}

impl MetadataBackend for CorpusBackend {
    fn search_title(&self, title: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        let mut hits: Vec<(f64, &PaperRecord)> = self
            .order
            .iter()
            .map(|id| &self.papers[id])
            .map(|p| (token_set_ratio(title, &p.title), p))
            .filter(|(s, _)| *s >= 0.5)
            .collect();
        hits.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.paper_id.cmp(&b.1.paper_id)));
        Ok(hits.into_iter().take(limit).map(|(_, p)| p.clone()).collect())
    }

    fn paper(&self, paper_id: &str) -> Result<Option<PaperRecord>, MetadataError> {
        Ok(self.papers.get(paper_id).cloned())
    }

    fn citations(&self, paper_id: &str, limit: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        if !self.papers.contains_key(paper_id) {
            return Err(MetadataError::NotFound(paper_id.to_string()));
        }
        let mut out: Vec<PaperRecord> = self
            .citers
            .get(paper_id)
            .into_iter()
            .flatten()
            .filter_map(|id| self.papers.get(id).cloned())
            .map(|mut r| {
                r.citation_contexts.retain(|c| c.cited_paper_id == paper_id);
                r
            })
            .collect();
        out.sort_by(recency_order);
        out.dedup_by(|a, b| a.paper_id == b.paper_id);
        out.truncate(limit);
        Ok(out)
    }
}
