//! Persistent workspace of threads, clips and paper references.
//!
//! A [`Workspace`] is a plain value: every mutation goes through
//! [`Workspace::apply`], which works on a copy and only commits it when the
//! operation succeeds, so a failed call never bumps the revision or leaves a
//! half-applied change behind. [`WorkspaceStore`] adds locking, the revision
//! check-and-set and atomic persistence.

mod outline;
mod persist;
mod workspace;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::PageRect;
use crate::linker::{CitationContext, ResolvedReference};
use crate::metadata::normalize_title;
use crate::vector::EmbeddingVector;

pub use outline::{build_outline, render_outline, OutlineContextGroup, OutlineNode};
pub use persist::{load_workspace, save_workspace, WorkspaceStore};
pub use workspace::{CommitMode, Workspace};

pub const WORKSPACE_FILE_VERSION: u32 = 1;
pub const UNORGANIZED_ID: &str = "unorganized";
pub const UNORGANIZED_LABEL: &str = "Unorganized Papers";
pub const MAX_LABEL_CHARS: usize = 200;
/// Derived labels for unnamed commits are cut to this many characters.
pub const DERIVED_LABEL_CHARS: usize = 60;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum StoreError {
    #[error("no such thread `{0}`")]
    NoSuchThread(String),
    #[error("no such clip `{0}`")]
    NoSuchClip(String),
    #[error("no paper `{paper}` in thread `{thread}`")]
    NoSuchPaper { thread: String, paper: String },
    #[error("reference `{0}` is not in the holding tank")]
    NotInTank(String),
    #[error("nothing to commit")]
    EmptyCommit,
    #[error("cannot move `{node}` under its own descendant `{parent}`")]
    CycleError { node: String, parent: String },
    #[error("the Unorganized Papers thread cannot be moved, renamed or deleted")]
    CannotMoveUnorganized,
    #[error("the Unorganized Papers thread only holds papers: {0}")]
    UnorganizedRestricted(String),
    #[error("thread `{0}` is not empty; pass the confirmation flag to delete it")]
    ConfirmationRequired(String),
    #[error("paper `{paper}` is already in thread `{thread}`")]
    PaperExists { thread: String, paper: String },
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("invalid paper reference: {0}")]
    InvalidPaper(String),
    #[error("stale revision: expected {expected}, workspace is at {actual}")]
    Conflict { expected: u64, actual: u64 },
    #[error("storage error: {0}")]
    Storage(String),
    #[error("workspace invariant violated: {0}")]
    Invariant(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NoSuchThread(_) => "NO_SUCH_THREAD",
            StoreError::NoSuchClip(_) => "NO_SUCH_CLIP",
            StoreError::NoSuchPaper { .. } => "NO_SUCH_PAPER",
            StoreError::NotInTank(_) => "NOT_IN_TANK",
            StoreError::EmptyCommit => "EMPTY_COMMIT",
            StoreError::CycleError { .. } => "CYCLE_ERROR",
            StoreError::CannotMoveUnorganized => "CANNOT_MOVE_UNORGANIZED",
            StoreError::UnorganizedRestricted(_) => "UNORGANIZED_RESTRICTED",
            StoreError::ConfirmationRequired(_) => "CONFIRMATION_REQUIRED",
            StoreError::PaperExists { .. } => "PAPER_EXISTS",
            StoreError::InvalidLabel(_) => "INVALID_LABEL",
            StoreError::InvalidClip(_) => "INVALID_CLIP",
            StoreError::InvalidPaper(_) => "INVALID_PAPER",
            StoreError::Conflict { .. } => "CONFLICT",
            StoreError::Storage(_) => "STORAGE_ERROR",
            StoreError::Invariant(_) => "INVARIANT_ERROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClipKind {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSource {
    pub doc_id: String,
    pub page: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rects: Vec<PageRect>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentence_indices: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub clip_id: String,
    pub kind: ClipKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Content hash of the image payload, kept in the asset sidecar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_sha256: Option<String>,
    pub source: ClipSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_id: Option<String>,
    /// Workspace revision at which the clip was added.
    pub created_at: u64,
}

/// A paper filed in a thread. Identity is the external id when known,
/// otherwise the normalized title.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PaperRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paper_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tldr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface: Option<String>,
}

impl PaperRef {
    pub fn with_id(id: &str, title: &str) -> Self {
        PaperRef { paper_id: Some(id.into()), title: Some(title.into()), ..Default::default() }
    }

    pub fn with_title(title: &str) -> Self {
        PaperRef { title: Some(title.into()), ..Default::default() }
    }

    /// `id:<paper_id>` or `title:<normalized title>`; `None` when neither is
    /// usable.
    pub fn identity(&self) -> Option<String> {
        if let Some(id) = self.paper_id.as_deref().map(str::trim).filter(|s| !s.is_empty()) {
            return Some(format!("id:{id}"));
        }
        let t = normalize_title(self.title.as_deref()?);
        (!t.is_empty()).then(|| format!("title:{t}"))
    }

    pub fn display_title(&self) -> &str {
        self.title.as_deref().or(self.paper_id.as_deref()).unwrap_or("")
    }

    /// Paper reference for a resolved citation; `None` when the reference
    /// carries neither an id nor a title.
    pub fn from_resolved(r: &ResolvedReference, context_id: &str) -> Option<Self> {
        let paper = r.paper.as_ref();
        let bib = r.bib.as_ref();
        let p = PaperRef {
            paper_id: paper.map(|p| p.paper_id.clone()).or_else(|| bib.and_then(|b| b.resolved_paper_id.clone())),
            title: paper
                .map(|p| p.title.clone())
                .filter(|t| !t.trim().is_empty())
                .or_else(|| bib.and_then(|b| b.title.clone())),
            year: paper.and_then(|p| p.year).or_else(|| bib.and_then(|b| b.year)),
            tldr: paper.and_then(|p| p.tldr.clone()),
            url: paper.and_then(|p| p.url.clone()),
            source_context: Some(context_id.to_string()),
            surface: Some(r.marker.surface.clone()),
        };
        p.identity().is_some().then_some(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thread {
    pub thread_id: String,
    pub label: String,
    #[serde(default)]
    pub children: Vec<Thread>,
    #[serde(default)]
    pub clips: Vec<Clip>,
    #[serde(default)]
    pub papers: Vec<PaperRef>,
    /// Revision of the last clip, paper or child added to this thread.
    #[serde(default)]
    pub last_additive_change: u64,
    /// Label embedding cache; dropped on rename and never persisted.
    #[serde(skip)]
    pub embedding: Option<EmbeddingVector>,
}

impl PartialEq for Thread {
    fn eq(&self, other: &Self) -> bool {
        self.thread_id == other.thread_id
            && self.label == other.label
            && self.children == other.children
            && self.clips == other.clips
            && self.papers == other.papers
            && self.last_additive_change == other.last_additive_change
    }
}

impl Thread {
    pub fn new(thread_id: &str, label: &str, stamp: u64) -> Self {
        Thread {
            thread_id: thread_id.into(),
            label: label.into(),
            children: vec![],
            clips: vec![],
            papers: vec![],
            last_additive_change: stamp,
            embedding: None,
        }
    }

    pub fn has_paper(&self, identity: &str) -> bool {
        self.papers.iter().any(|p| p.identity().as_deref() == Some(identity))
    }

    /// Largest additive stamp in this subtree.
    pub fn subtree_stamp(&self) -> u64 {
        self.children.iter().map(Thread::subtree_stamp).fold(self.last_additive_change, u64::max)
    }

    /// Pre-order walk of this thread and its descendants with depths.
    pub fn walk(&self) -> Vec<(&Thread, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(self, 0usize)];
        while let Some((t, d)) = stack.pop() {
            out.push((t, d));
            for c in t.children.iter().rev() {
                stack.push((c, d + 1));
            }
        }
        out
    }

    /// Clips plus papers in this subtree.
    pub fn item_count(&self) -> usize {
        self.walk().iter().map(|(t, _)| t.clips.len() + t.papers.len()).sum()
    }
}

/// Text shown for a citation context in outlines, recorded on commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub doc_id: String,
    pub page: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TankContent {
    Context { context: CitationContext },
    Image { doc_id: String, rect: PageRect, image_sha256: String },
}

/// Staging area between a highlight and a commit. `selected` holds keys of
/// resolved references and is always a subset of the context's keys.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HoldingTank {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<TankContent>,
    #[serde(default)]
    pub selected: BTreeSet<String>,
}

impl HoldingTank {
    pub fn is_empty(&self) -> bool {
        self.content.is_none()
    }

    pub fn context(&self) -> Option<&CitationContext> {
        match &self.content {
            Some(TankContent::Context { context }) => Some(context),
            _ => None,
        }
    }

    pub fn selected_refs(&self) -> Vec<&ResolvedReference> {
        self.context()
            .map(|c| c.resolved.iter().filter(|r| self.selected.contains(&r.key)).collect())
            .unwrap_or_default()
    }
}

/// Image bytes addressed by their sha256.
pub type Asset = Arc<[u8]>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

pub fn validate_label(label: &str) -> Result<String, StoreError> {
    let label = label.trim();
    if label.is_empty() {
        return Err(StoreError::InvalidLabel("label is empty".into()));
    }
    if label.chars().count() > MAX_LABEL_CHARS {
        return Err(StoreError::InvalidLabel(format!("label longer than {MAX_LABEL_CHARS} characters")));
    }
    Ok(label.to_string())
}
