//! Thread placement suggestions.
//!
//! Threads are grouped into vertical chains (root-to-leaf paths). Each chain
//! is scored against the target text by group similarity (cosine between the
//! chain centroid and the target) times cohesion (best single member), and
//! members within a chain are ranked by their own similarity.

mod embed;

use serde::{Deserialize, Serialize};

use crate::store::{Thread, Workspace};
use crate::vector::{score_key, EmbeddingVector};

pub use embed::{EmbeddingConfig, EmbeddingProvider, HashingEmbedder, DEFAULT_EMBEDDING_DIM};

pub const DEFAULT_SUGGESTIONS: usize = 5;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SuggestError {
    #[error("zero-norm embedding")]
    ZeroVector,
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("empty chain")]
    EmptyChain,
    #[error("unknown embedding provider `{0}`")]
    UnknownProvider(String),
}

impl SuggestError {
    pub fn code(&self) -> &'static str {
        match self {
            SuggestError::ZeroVector => "ZERO_VECTOR",
            SuggestError::DimensionMismatch(..) => "DIMENSION_MISMATCH",
            SuggestError::EmptyChain => "EMPTY_CHAIN",
            SuggestError::UnknownProvider(_) => "UNKNOWN_PROVIDER",
        }
    }
}

/// One thread of a chain with everything the ranking needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMember {
    pub thread_id: String,
    pub label: String,
    pub embedding: EmbeddingVector,
    pub last_additive_change: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadChain {
    /// Root first.
    pub member_thread_ids: Vec<String>,
    pub centroid: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberScore {
    pub thread_id: String,
    pub label: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSuggestion {
    pub chain: ThreadChain,
    pub group_similarity: f64,
    pub cohesion: f64,
    pub objective: f64,
    /// Most recent additive change among the members.
    pub last_additive_change: u64,
    pub member_ranking: Vec<MemberScore>,
}

/// A single flattened suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub thread_id: String,
    pub label: String,
    /// Root-to-leaf path of the chain the suggestion came from.
    pub chain: Vec<String>,
    pub similarity: f64,
    pub objective: f64,
}

fn check(v: &EmbeddingVector, target: &EmbeddingVector) -> Result<(), SuggestError> {
    if v.dim() != target.dim() {
        return Err(SuggestError::DimensionMismatch(v.dim(), target.dim()));
    }
    if v.is_zero() || target.is_zero() {
        return Err(SuggestError::ZeroVector);
    }
    Ok(())
}

/// Cosine between the mean of `members` and `target`.
pub fn group_similarity(members: &[EmbeddingVector], target: &EmbeddingVector) -> Result<f64, SuggestError> {
    let first = members.first().ok_or(SuggestError::EmptyChain)?;
    if let Some(bad) = members.iter().find(|m| m.dim() != first.dim()) {
        return Err(SuggestError::DimensionMismatch(bad.dim(), first.dim()));
    }
    let centroid = EmbeddingVector::mean(members).expect("non-empty, equal dims");
    check(&centroid, target)?;
    Ok(centroid.cosine(target).expect("checked"))
}

/// Best cosine between any member and `target`. Zero-norm members count as 0.
pub fn cohesion(members: &[EmbeddingVector], target: &EmbeddingVector) -> Result<f64, SuggestError> {
    if members.is_empty() {
        return Err(SuggestError::EmptyChain);
    }
    if target.is_zero() || members.iter().all(EmbeddingVector::is_zero) {
        return Err(SuggestError::ZeroVector);
    }
    let mut best = f64::NEG_INFINITY;
    for m in members {
        if m.dim() != target.dim() {
            return Err(SuggestError::DimensionMismatch(m.dim(), target.dim()));
        }
        best = best.max(m.cosine(target).unwrap_or(0.0));
    }
    Ok(best)
}

fn paths<'a>(t: &'a Thread, prefix: &mut Vec<&'a Thread>, out: &mut Vec<Vec<&'a Thread>>) {
    prefix.push(t);
    if t.children.is_empty() {
        out.push(prefix.clone());
    }
    for c in &t.children {
        paths(c, prefix, out);
    }
    prefix.pop();
}

/// Every maximal root-to-leaf path of the forest in depth-first order.
/// Unorganized is not part of the forest.
pub fn enumerate_chains(ws: &Workspace) -> Vec<Vec<&Thread>> {
    let mut out = Vec::new();
    for t in &ws.threads {
        paths(t, &mut Vec::new(), &mut out);
    }
    out
}

/// Label embedding, from the thread's cache when it fits the provider.
pub fn label_embedding(t: &Thread, provider: &dyn EmbeddingProvider) -> EmbeddingVector {
    match &t.embedding {
        Some(e) if e.dim() == provider.dim() => e.clone(),
        _ => provider.embed(&t.label),
    }
}

/// Fills every thread's label-embedding cache.
pub fn warm_label_cache(ws: &mut Workspace, provider: &dyn EmbeddingProvider) {
    fn visit(t: &mut Thread, provider: &dyn EmbeddingProvider) {
        if t.embedding.as_ref().is_none_or(|e| e.dim() != provider.dim()) {
            t.embedding = Some(provider.embed(&t.label));
        }
        for c in &mut t.children {
            visit(c, provider);
        }
    }
    for t in &mut ws.threads {
        visit(t, provider);
    }
}

pub fn workspace_chains(ws: &Workspace, provider: &dyn EmbeddingProvider) -> Vec<Vec<ChainMember>> {
    enumerate_chains(ws)
        .into_iter()
        .map(|path| {
            path.into_iter()
                .map(|t| ChainMember {
                    thread_id: t.thread_id.clone(),
                    label: t.label.clone(),
                    embedding: label_embedding(t, provider),
                    last_additive_change: t.last_additive_change,
                })
                .collect()
        })
        .collect()
}

/// Scores and orders chains against `target`.
///
/// Chains sort by descending objective, then by most recent additive change,
/// then by member ids. Scores are compared at [`crate::vector::SCORE_RESOLUTION`].
pub fn rank_chain_members(chains: Vec<Vec<ChainMember>>, target: &EmbeddingVector) -> Vec<RankedSuggestion> {
    let mut ranked: Vec<RankedSuggestion> = chains
        .into_iter()
        .filter(|c| !c.is_empty())
        .map(|chain| {
            let vectors: Vec<EmbeddingVector> = chain.iter().map(|m| m.embedding.clone()).collect();
            let group = group_similarity(&vectors, target).unwrap_or(0.0);
            let coh = cohesion(&vectors, target).unwrap_or(0.0);
            let mut members: Vec<MemberScore> = chain
                .iter()
                .map(|m| MemberScore {
                    thread_id: m.thread_id.clone(),
                    label: m.label.clone(),
                    similarity: m.embedding.cosine(target).unwrap_or(0.0),
                })
                .collect();
            members.sort_by_key(|m| std::cmp::Reverse(score_key(m.similarity)));
            let centroid = EmbeddingVector::mean(&vectors).unwrap_or_else(|| vectors[0].clone());
            RankedSuggestion {
                chain: ThreadChain { member_thread_ids: chain.iter().map(|m| m.thread_id.clone()).collect(), centroid },
                group_similarity: group,
                cohesion: coh,
                objective: group * coh,
                last_additive_change: chain.iter().map(|m| m.last_additive_change).max().unwrap_or(0),
                member_ranking: members,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        score_key(b.objective)
            .cmp(&score_key(a.objective))
            .then(b.last_additive_change.cmp(&a.last_additive_change))
            .then_with(|| a.chain.member_thread_ids.cmp(&b.chain.member_thread_ids))
    });
    ranked
}

pub fn rank_chains(ws: &Workspace, target_text: &str, provider: &dyn EmbeddingProvider) -> Vec<RankedSuggestion> {
    rank_chain_members(workspace_chains(ws, provider), &provider.embed(target_text))
}

/// Top `k` threads for `text`, best member of the best chain first. A thread
/// reached through several chains is listed once, at its best position.
pub fn suggest_for_text(ws: &Workspace, text: &str, provider: &dyn EmbeddingProvider, k: usize) -> Vec<Suggestion> {
    let mut out: Vec<Suggestion> = Vec::new();
    for r in rank_chains(ws, text, provider) {
        for m in &r.member_ranking {
            if out.len() == k {
                return out;
            }
            if out.iter().any(|s| s.thread_id == m.thread_id) {
                continue;
            }
            out.push(Suggestion {
                thread_id: m.thread_id.clone(),
                label: m.label.clone(),
                chain: r.chain.member_thread_ids.clone(),
                similarity: m.similarity,
                objective: r.objective,
            });
        }
    }
    out
}

/// Suggestions for the holding tank's context text; empty without one.
pub fn suggest_for_tank(ws: &Workspace, provider: &dyn EmbeddingProvider, k: usize) -> Vec<Suggestion> {
    match ws.tank.context() {
        Some(ctx) => suggest_for_text(ws, &ctx.text, provider, k),
        None => vec![],
    }
}
