//! The operations shared by the command line and the HTTP service.
//!
//! An [`Engine`] owns one workspace under a home directory:
//!
//! ```text
//! <home>/config.toml
//! <home>/documents/<doc>.json            ingested and merged documents
//! <home>/workspaces/<name>.json          workspace file
//! <home>/workspaces/<name>.assets/       image payloads
//! <home>/recommendations/<name>/<thread>.json
//! <home>/cache/metadata/                 metadata response cache
//! ```

mod config;
mod error;
mod views;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::discovery::{self, build_overview, render_overview, CitationGraph, Overview, RecommendationSet};
use crate::doc_model::{ingest_document, merge_with_report, to_native_json, ParsedDocument};
use crate::fsutil::{to_json_pretty, write_atomic};
use crate::geometry::{PageRect, Rect};
use crate::linker::{
    capture_area, locate_sentences, resolve_context, to_document_space, Highlight, HighlightKind, LinkError,
    ViewportTransform,
};
use crate::metadata::{
    Corpus, CorpusBackend, HttpBackend, MetadataClient, MetadataError, NoLookup, PaperLookup, PaperRecord, Source,
};
use crate::store::{
    build_outline, render_outline, CommitMode, PaperRef, StoreError, Thread, Workspace, WorkspaceStore,
};
use crate::suggest::{suggest_for_tank, suggest_for_text, warm_label_cache, EmbeddingProvider, Suggestion};

pub use config::{
    EngineConfig, MetadataConfig, MetadataMode, ServiceConfig, CONFIG_FILE, DEFAULT_API_KEY_ENV, DEFAULT_BASE_URL,
    DEFAULT_PORT, DEFAULT_WORKSPACE,
};
pub use error::{EngineError, ErrorKind};
pub use views::{CommitResult, DocumentSummary, DrawerEntry, DrawerView, Mutation, TankView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Outline,
    Json,
}

/// What to register as the opened paper: an ingested document or an
/// explicit reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OpenPaper {
    Document { doc_id: String },
    Paper { paper: PaperRef },
}

struct OfflineGraph;

impl CitationGraph for OfflineGraph {
    fn citations_of(&self, _: &str, _: usize) -> Result<Vec<PaperRecord>, MetadataError> {
        Err(MetadataError::Network("metadata service disabled".into()))
    }

    fn paper(&self, _: &str) -> Result<Option<PaperRecord>, MetadataError> {
        Ok(None)
    }
}

pub struct Engine {
    home: PathBuf,
    config: EngineConfig,
    store: WorkspaceStore,
    metadata: Option<MetadataClient>,
    embedder: Box<dyn EmbeddingProvider>,
    documents: RwLock<HashMap<String, Arc<ParsedDocument>>>,
}

fn file_stem_for(id: &str) -> String {
    if !id.is_empty() && id.len() <= 100 && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) && !id.starts_with('.') {
        id.to_string()
    } else {
        format!("h-{}", &crate::store::sha256_hex(id.as_bytes())[..16])
    }
}

impl Engine {
    /// Opens the engine under `home` with `<home>/config.toml`.
    pub fn open(home: impl Into<PathBuf>) -> Result<Self, EngineError> {
        let home = home.into();
        let config = EngineConfig::load(&home).map_err(EngineError::Config)?;
        Self::with_config(home, config)
    }

    pub fn with_config(home: impl Into<PathBuf>, mut config: EngineConfig) -> Result<Self, EngineError> {
        let home = home.into();
        config.validate().map_err(EngineError::Config)?;
        config.resolve_paths(&home);
        fs::create_dir_all(&home).map_err(|e| EngineError::Io(format!("{}: {e}", home.display())))?;
        let metadata = Self::build_client(&config)?;
        let embedder = config.embedding.build()?;
        let ws_path = home.join("workspaces").join(format!("{}.json", config.workspace));
        let store = WorkspaceStore::open(ws_path, &config.workspace)?;
        let engine = Engine { home, config, store, metadata, embedder, documents: RwLock::new(HashMap::new()) };
        engine.warm_cache();
        Ok(engine)
    }

    fn build_client(config: &EngineConfig) -> Result<Option<MetadataClient>, EngineError> {
        let m = &config.metadata;
        let source = match m.mode {
            MetadataMode::Offline => return Ok(None),
            MetadataMode::Fixture => Source::Fixture(m.fixture_dir.clone().expect("validated")),
            MetadataMode::Corpus => {
                let corpus = Corpus::load(m.corpus.as_deref().expect("validated"))?;
                Source::Backend(Arc::new(CorpusBackend::new(corpus)))
            }
            MetadataMode::Http => {
                let key = std::env::var(&m.api_key_env).ok().filter(|k| !k.is_empty());
                Source::Backend(Arc::new(HttpBackend::new(&m.base_url, key)?))
            }
        };
        Ok(Some(MetadataClient::new(source, config.client_config())))
    }

    pub fn home(&self) -> &Path {
        &self.home
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> &WorkspaceStore {
        &self.store
    }

    pub fn metadata_client(&self) -> Option<&MetadataClient> {
        self.metadata.as_ref()
    }

    pub fn workspace_path(&self) -> &Path {
        self.store.path()
    }

    pub fn snapshot(&self) -> Workspace {
        self.store.snapshot()
    }

    pub fn revision(&self) -> u64 {
        self.store.revision()
    }

    fn lookup(&self) -> &dyn PaperLookup {
        match &self.metadata {
            Some(c) => c,
            None => &NoLookup,
        }
    }

    fn graph(&self) -> &dyn CitationGraph {
        match &self.metadata {
            Some(c) => c,
            None => &OfflineGraph,
        }
    }

    fn warm_cache(&self) {
        self.store.update_cache(|ws| warm_label_cache(ws, self.embedder.as_ref()));
    }

    fn mutate<T>(
        &self,
        expected: Option<u64>,
        f: impl FnOnce(&mut Workspace) -> Result<T, StoreError>,
    ) -> Result<Mutation<T>, EngineError> {
        let (value, revision) = self.store.mutate(expected, f)?;
        self.warm_cache();
        Ok(Mutation { revision, value })
    }

    // ---- documents ----

    fn documents_dir(&self) -> PathBuf {
        self.home.join("documents")
    }

    fn document_path(&self, doc_id: &str) -> PathBuf {
        self.documents_dir().join(format!("{}.json", file_stem_for(doc_id)))
    }

    /// Parses, merges fragmented sentences, validates and caches a document.
    /// Ingesting a `doc_id` again replaces the cached copy.
    pub fn ingest(&self, raw: &[u8]) -> Result<DocumentSummary, EngineError> {
        let parsed = ingest_document(raw)?;
        let path = self.document_path(&parsed.doc_id);
        let (doc, report) = merge_with_report(&parsed);
        doc.validate()?;
        write_atomic(&path, to_native_json(&doc).as_bytes()).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))?;
        info!(doc_id = %doc.doc_id, merges = report.count(), "ingested document");
        let summary = DocumentSummary::new(&doc, report.count());
        self.documents.write().unwrap_or_else(|e| e.into_inner()).insert(doc.doc_id.clone(), Arc::new(doc));
        Ok(summary)
    }

    pub fn document(&self, doc_id: &str) -> Result<Arc<ParsedDocument>, EngineError> {
        if let Some(d) = self.documents.read().unwrap_or_else(|e| e.into_inner()).get(doc_id) {
            return Ok(d.clone());
        }
        let path = self.document_path(doc_id);
        let raw = fs::read(&path).map_err(|_| EngineError::NoSuchDocument(doc_id.into()))?;
        let doc = Arc::new(crate::doc_model::ingest_native(&raw)?);
        if doc.doc_id != doc_id {
            return Err(EngineError::NoSuchDocument(doc_id.into()));
        }
        self.documents.write().unwrap_or_else(|e| e.into_inner()).insert(doc_id.into(), doc.clone());
        Ok(doc)
    }

    // ---- highlights and the tank ----

    /// Runs a highlight through the linker and loads the result into the
    /// holding tank. Area highlights need the clipped image.
    pub fn highlight(
        &self,
        expected: Option<u64>,
        highlight: &Highlight,
        transform: Option<&ViewportTransform>,
        image: Option<Vec<u8>>,
    ) -> Result<TankView, EngineError> {
        let doc = self.document(&highlight.doc_id)?;
        highlight.validate(doc.pages.len())?;
        let transform = transform.cloned().unwrap_or_else(|| ViewportTransform::identity(doc.pages.len()));
        let rects = to_document_space(highlight, &transform)?;
        let linker = &self.config.linker;
        match highlight.kind {
            HighlightKind::Text => {
                let core = locate_sentences(&doc, &rects, linker.overlap_threshold);
                if core.is_empty() {
                    return Err(LinkError::NothingSelected.into());
                }
                let ctx = resolve_context(&doc, &core, linker, self.lookup())?;
                self.mutate(expected, |ws| ws.tank_load(ctx))?;
            }
            HighlightKind::Area => {
                let image = image.ok_or_else(|| EngineError::InvalidRequest("area highlights need an image".into()))?;
                let capture = capture_area(highlight, rects[0], image, linker.max_image_bytes)?;
                self.mutate(expected, |ws| ws.tank_load_image(&capture.doc_id, capture.rect, &capture.image).map(|_| ()))?;
            }
        }
        Ok(self.tank())
    }

    /// Command-line analogue of a text highlight: one rectangle on one page,
    /// given in units of `scale` times document points.
    pub fn extract(
        &self,
        expected: Option<u64>,
        doc_id: &str,
        page: u32,
        rect: Rect,
        scale: f64,
    ) -> Result<TankView, EngineError> {
        let doc = self.document(doc_id)?;
        let h = Highlight::text(doc_id, vec![PageRect::new(page, rect)]);
        self.highlight(expected, &h, Some(&ViewportTransform::scaled(scale, doc.pages.len())), None)
    }

    pub fn tank(&self) -> TankView {
        let ws = self.store.snapshot();
        TankView {
            revision: ws.revision,
            suggestions: suggest_for_tank(&ws, self.embedder.as_ref(), crate::suggest::DEFAULT_SUGGESTIONS),
            tank: ws.tank,
        }
    }

    pub fn tank_deselect(&self, expected: Option<u64>, key: &str) -> Result<TankView, EngineError> {
        self.mutate(expected, |ws| ws.tank_deselect(key))?;
        Ok(self.tank())
    }

    pub fn tank_reselect(&self, expected: Option<u64>, key: &str) -> Result<TankView, EngineError> {
        self.mutate(expected, |ws| ws.tank_reselect(key))?;
        Ok(self.tank())
    }

    pub fn commit(&self, expected: Option<u64>, mode: &CommitMode) -> Result<CommitResult, EngineError> {
        let m = self.mutate(expected, |ws| ws.commit(mode))?;
        Ok(CommitResult { revision: m.revision, thread_id: m.value, drawer: self.drawer() })
    }

    // ---- threads ----

    pub fn drawer(&self) -> DrawerView {
        DrawerView::new(&self.store.snapshot())
    }

    pub fn thread(&self, id: &str) -> Result<Thread, EngineError> {
        self.store.read(|ws| ws.thread(id).cloned()).ok_or_else(|| StoreError::NoSuchThread(id.into()).into())
    }

    pub fn create_thread(&self, expected: Option<u64>, label: &str, parent: Option<&str>) -> Result<Mutation<String>, EngineError> {
        self.mutate(expected, |ws| ws.create_thread(label, parent))
    }

    pub fn rename_thread(&self, expected: Option<u64>, id: &str, label: &str) -> Result<Mutation<()>, EngineError> {
        self.mutate(expected, |ws| ws.rename_thread(id, label))
    }

    pub fn delete_thread(&self, expected: Option<u64>, id: &str, confirm: bool) -> Result<Mutation<()>, EngineError> {
        let m = self.mutate(expected, |ws| ws.delete_thread(id, confirm).map(|_| ()))?;
        let _ = fs::remove_file(self.recommendations_path(id));
        Ok(m)
    }

    pub fn move_thread(
        &self,
        expected: Option<u64>,
        id: &str,
        parent: Option<&str>,
        position: Option<usize>,
    ) -> Result<Mutation<()>, EngineError> {
        self.mutate(expected, |ws| ws.move_thread(id, parent, position))
    }

    pub fn add_paper(&self, expected: Option<u64>, thread_id: &str, paper: PaperRef) -> Result<Mutation<String>, EngineError> {
        self.mutate(expected, |ws| ws.add_paper(thread_id, paper))
    }

    pub fn remove_paper(&self, expected: Option<u64>, thread_id: &str, identity: &str) -> Result<Mutation<()>, EngineError> {
        self.mutate(expected, |ws| ws.remove_paper(thread_id, identity).map(|_| ()))
    }

    pub fn move_paper(&self, expected: Option<u64>, from: &str, identity: &str, to: &str) -> Result<Mutation<()>, EngineError> {
        self.mutate(expected, |ws| ws.move_paper(from, identity, to))
    }

    pub fn edit_clip(&self, expected: Option<u64>, clip_id: &str, text: &str) -> Result<Mutation<()>, EngineError> {
        self.mutate(expected, |ws| ws.edit_clip(clip_id, text))
    }

    /// Adds a recommended paper (by id) from the thread's last refresh.
    pub fn add_recommendation(&self, expected: Option<u64>, thread_id: &str, paper_id: &str) -> Result<Mutation<String>, EngineError> {
        let set = self
            .recommendations(thread_id)?
            .ok_or_else(|| EngineError::InvalidRequest(format!("no recommendations for `{thread_id}`; refresh first")))?;
        let rec = set
            .recommendations
            .iter()
            .find(|r| r.candidate.paper_id == paper_id)
            .ok_or_else(|| EngineError::InvalidRequest(format!("`{paper_id}` is not a current recommendation")))?;
        self.add_paper(expected, thread_id, discovery::recommendation_paper(rec))
    }

    // ---- papers ----

    fn paper_for_document(&self, doc_id: &str) -> Result<PaperRef, EngineError> {
        let doc = self.document(doc_id)?;
        let title = doc.title.trim();
        if title.is_empty() {
            return Ok(PaperRef { paper_id: Some(format!("doc:{doc_id}")), ..Default::default() });
        }
        let found = match self.lookup().lookup_title(title) {
            Ok(found) => found,
            Err(e @ MetadataError::FixtureMiss { .. }) => return Err(e.into()),
            Err(_) => None,
        };
        Ok(match found {
            Some(p) => PaperRef {
                paper_id: Some(p.paper_id),
                title: Some(p.title).filter(|t| !t.is_empty()).or_else(|| Some(title.to_string())),
                year: p.year,
                tldr: p.tldr,
                url: p.url,
                source_context: None,
                surface: None,
            },
            None => PaperRef::with_title(title),
        })
    }

    /// Registers an opened paper; returns its identity.
    pub fn open_paper(&self, expected: Option<u64>, what: &OpenPaper) -> Result<Mutation<String>, EngineError> {
        let paper = match what {
            OpenPaper::Document { doc_id } => self.paper_for_document(doc_id)?,
            OpenPaper::Paper { paper } => paper.clone(),
        };
        self.mutate(expected, |ws| ws.register_open_paper(paper))
    }

    // ---- suggestions, discovery, export ----

    pub fn suggest(&self, text: &str, k: usize) -> Vec<Suggestion> {
        suggest_for_text(&self.store.snapshot(), text, self.embedder.as_ref(), k)
    }

    fn recommendations_path(&self, thread_id: &str) -> PathBuf {
        self.home
            .join("recommendations")
            .join(&self.config.workspace)
            .join(format!("{}.json", file_stem_for(thread_id)))
    }

    /// Last computed recommendations for a thread, if any.
    pub fn recommendations(&self, thread_id: &str) -> Result<Option<RecommendationSet>, EngineError> {
        let path = self.recommendations_path(thread_id);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| EngineError::Io(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(EngineError::Io(format!("{}: {e}", path.display()))),
        }
    }

    /// Recomputes recommendations from a snapshot, so drawer mutations are
    /// not blocked while citations are fetched.
    pub fn refresh_recommendations(&self, thread_id: &str) -> Result<RecommendationSet, EngineError> {
        let ws = self.store.snapshot();
        let set = discovery::refresh(&ws, thread_id, self.graph())?;
        let path = self.recommendations_path(thread_id);
        write_atomic(&path, to_json_pretty(&set).as_bytes()).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))?;
        Ok(set)
    }

    pub fn overview(&self, thread_id: &str) -> Result<Overview, EngineError> {
        let ws = self.store.snapshot();
        let recs = self.recommendations(thread_id)?;
        Ok(build_overview(&ws, thread_id, recs.as_ref())?)
    }

    pub fn render_overview(&self, thread_id: &str) -> Result<String, EngineError> {
        Ok(render_overview(&self.overview(thread_id)?))
    }

    /// Outline of one thread or of the whole drawer.
    pub fn export(&self, thread_id: Option<&str>, format: ExportFormat) -> Result<String, EngineError> {
        let ws = self.store.snapshot();
        let nodes = build_outline(&ws, thread_id)?;
        Ok(match format {
            ExportFormat::Outline => render_outline(&nodes),
            ExportFormat::Json => to_json_pretty(&nodes),
        })
    }
}

#[cfg(test)]
mod tests;
