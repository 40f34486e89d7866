use std::path::PathBuf;

use super::*;
use crate::store::{TankContent, UNORGANIZED_ID};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn corpus_engine(home: &Path) -> Engine {
    let mut cfg = EngineConfig::default();
    cfg.metadata.mode = MetadataMode::Corpus;
    cfg.metadata.corpus = Some(fixtures().join("corpus.json"));
    cfg.metadata.requests_per_second = 10_000.0;
    Engine::with_config(home, cfg).unwrap()
}

fn offline_engine(home: &Path) -> Engine {
    let mut cfg = EngineConfig::default();
    cfg.metadata.mode = MetadataMode::Offline;
    Engine::with_config(home, cfg).unwrap()
}

fn ingest_small(e: &Engine) -> DocumentSummary {
    e.ingest(&fs::read(fixtures().join("docs/doc_small.json")).unwrap()).unwrap()
}

fn highlight_at(e: &Engine, page: u32, y: f64) -> TankView {
    e.extract(None, "doc-small", page, Rect::new(80.0, y, 200.0, 10.0), 1.0).unwrap()
}

fn tank_keys(t: &TankView) -> Vec<String> {
    t.tank.context().unwrap().resolved.iter().map(|r| r.key.clone()).collect()
}

#[test]
fn ingest_reports_counts_and_caches() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    let s = ingest_small(&e);
    assert_eq!((s.pages, s.sentences, s.bib_entries, s.markers, s.merged_fragments), (3, 12, 9, 7, 0));
    assert!(dir.path().join("documents/doc-small.json").exists());
    drop(e);
    let e = offline_engine(dir.path());
    assert_eq!(e.document("doc-small").unwrap().sentences.len(), 12);
    assert!(matches!(e.document("nope"), Err(EngineError::NoSuchDocument(_))));
}

#[test]
fn ingest_merges_fragments() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    let s = e.ingest(&fs::read(fixtures().join("docs/fragmented.json")).unwrap()).unwrap();
    assert_eq!(s.merged_fragments, 12);
    assert_eq!(s.sentences, 20);
}

#[test]
fn highlight_loads_tank_with_resolved_refs() {
    let dir = tempfile::tempdir().unwrap();
    let e = corpus_engine(dir.path());
    ingest_small(&e);
    let t = highlight_at(&e, 1, 150.0);
    assert_eq!(tank_keys(&t), ["b1", "b2", "b3", "b4", "b5", "b7", "b6"]);
    assert_eq!(t.tank.selected.len(), 7);
    assert_eq!(t.revision, 1);
    let ctx = t.tank.context().unwrap();
    assert_eq!(ctx.resolved[0].paper.as_ref().unwrap().paper_id, "gam1986");
}

#[test]
fn empty_selection_is_an_error_and_leaves_revision() {
    let dir = tempfile::tempdir().unwrap();
    let e = corpus_engine(dir.path());
    ingest_small(&e);
    let err = e.extract(None, "doc-small", 0, Rect::new(0.0, 700.0, 10.0, 10.0), 1.0).unwrap_err();
    assert_eq!(err.code(), "NOTHING_SELECTED");
    assert_eq!(e.revision(), 0);
}

#[test]
fn stale_revision_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    e.create_thread(Some(0), "A", None).unwrap();
    let err = e.create_thread(Some(0), "B", None).unwrap_err();
    assert_eq!(err.code(), "CONFLICT");
    assert_eq!(err.kind(), ErrorKind::Conflict);
    assert_eq!(e.drawer().threads.len(), 2);
}

#[test]
fn commit_files_refs_and_clears_tank() {
    let dir = tempfile::tempdir().unwrap();
    let e = corpus_engine(dir.path());
    ingest_small(&e);
    highlight_at(&e, 1, 150.0);
    e.tank_deselect(None, "b4").unwrap();
    let r = e.commit(None, &CommitMode::NewThread { label: Some("GAMs".into()) }).unwrap();
    let th = e.thread(&r.thread_id).unwrap();
    assert_eq!(th.papers.len(), 6);
    assert_eq!(th.clips.len(), 1);
    assert!(!th.has_paper("id:caruana2015"));
    assert!(e.tank().tank.is_empty());
    assert_eq!(r.drawer.threads[1].label, "GAMs");
}

#[test]
fn area_highlight_stores_image_asset() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    ingest_small(&e);
    let h = Highlight::area("doc-small", PageRect::new(2, Rect::new(72.0, 300.0, 200.0, 120.0)));
    let png = vec![7u8; 10 * 1024];
    let t = e.highlight(None, &h, None, Some(png.clone())).unwrap();
    let Some(TankContent::Image { image_sha256, .. }) = &t.tank.content else { panic!("{:?}", t.tank) };
    let sha = image_sha256.clone();
    let r = e.commit(None, &CommitMode::NewThread { label: None }).unwrap();
    assert_eq!(e.thread(&r.thread_id).unwrap().label, "Image from doc-small p.3");
    assert_eq!(e.snapshot().asset(&sha).map(|a| a.to_vec()), Some(png));
    assert!(e.highlight(None, &h, None, None).is_err());
    assert_eq!(e.highlight(None, &h, None, Some(vec![0; 3 << 20])).unwrap_err().kind(), ErrorKind::TooLarge);
}

#[test]
fn open_paper_goes_to_unorganized() {
    let dir = tempfile::tempdir().unwrap();
    let e = corpus_engine(dir.path());
    ingest_small(&e);
    let m = e.open_paper(None, &OpenPaper::Document { doc_id: "doc-small".into() }).unwrap();
    assert_eq!(m.value, "id:threads2023");
    let ws = e.snapshot();
    assert_eq!(ws.current_paper.as_deref(), Some("id:threads2023"));
    assert!(ws.thread(UNORGANIZED_ID).unwrap().has_paper("id:threads2023"));
}

#[test]
fn refresh_and_add_recommendation() {
    let dir = tempfile::tempdir().unwrap();
    let e = corpus_engine(dir.path());
    ingest_small(&e);
    highlight_at(&e, 1, 246.0);
    let t = e.commit(None, &CommitMode::NewThread { label: Some("Neural GAMs".into()) }).unwrap().thread_id;
    assert!(e.recommendations(&t).unwrap().is_none());
    let set = e.refresh_recommendations(&t).unwrap();
    assert_eq!(set.references.len(), 3);
    let ids: Vec<_> = set.recommendations.iter().map(|r| r.candidate.paper_id.as_str()).collect();
    assert!(ids.contains(&"shapegam2023"));
    assert!(!ids.contains(&"nam2021"));
    assert_eq!(e.recommendations(&t).unwrap(), Some(set.clone()));
    e.add_recommendation(None, &t, "shapegam2023").unwrap();
    assert!(e.thread(&t).unwrap().has_paper("id:shapegam2023"));
    assert!(e.add_recommendation(None, &t, "gam1986").is_err());
    e.delete_thread(None, &t, true).unwrap();
    assert!(e.recommendations(&t).unwrap().is_none());
}

#[test]
fn offline_mode_leaves_refs_unresolved() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    ingest_small(&e);
    let t = highlight_at(&e, 1, 246.0);
    let ctx = t.tank.context().unwrap();
    assert!(ctx.resolved.iter().filter(|r| r.key != "b8").all(|r| r.paper.is_none()));
    let t = e.commit(None, &CommitMode::NewThread { label: None }).unwrap().thread_id;
    assert!(e.refresh_recommendations(&t).unwrap().recommendations.is_empty());
}

#[test]
fn suggestions_rank_existing_threads() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    let a = e.create_thread(None, "neural additive models", None).unwrap().value;
    e.create_thread(None, "user study design", None).unwrap();
    let s = e.suggest("additive models with neural nets", 5);
    assert_eq!(s[0].thread_id, a);
}

#[test]
fn export_formats() {
    let dir = tempfile::tempdir().unwrap();
    let e = offline_engine(dir.path());
    let a = e.create_thread(None, "A", None).unwrap().value;
    e.create_thread(None, "B", Some(&a)).unwrap();
    let text = e.export(Some(&a), ExportFormat::Outline).unwrap();
    assert_eq!(text, "- A [t1]\n  - B [t2]\n");
    let json: serde_json::Value = serde_json::from_str(&e.export(None, ExportFormat::Json).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
}

#[test]
fn file_stems_are_safe() {
    assert_eq!(file_stem_for("t12"), "t12");
    assert!(file_stem_for("../etc").starts_with("h-"));
    assert!(file_stem_for("").starts_with("h-"));
}
