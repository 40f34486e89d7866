//! Scripted end-to-end session against recorded metadata.
//!
//! Re-record the fixtures after changing the corpus or the session:
//! `cargo test -p threadloom-core --test session -- --ignored record`

use std::fs;
use std::path::{Path, PathBuf};

use threadloom_core::engine::{Engine, EngineConfig, ExportFormat, MetadataMode, OpenPaper};
use threadloom_core::geometry::Rect;
use threadloom_core::store::{CommitMode, UNORGANIZED_ID};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_engine(home: &Path) -> Engine {
    let mut cfg = EngineConfig::default();
    cfg.metadata.mode = MetadataMode::Fixture;
    cfg.metadata.fixture_dir = Some(fixtures().join("metadata"));
    Engine::with_config(home, cfg).unwrap()
}

/// Returns the final workspace bytes.
fn run_session(e: &Engine) -> Vec<u8> {
    e.ingest(&fs::read(fixtures().join("docs/doc_small.json")).unwrap()).unwrap();
    let paper = e.open_paper(None, &OpenPaper::Document { doc_id: "doc-small".into() }).unwrap().value;

    let hl = |page, y| e.extract(None, "doc-small", page, Rect::new(80.0, y, 200.0, 10.0), 1.0).unwrap();
    hl(1, 150.0);
    let gams = e.commit(None, &CommitMode::NewThread { label: Some("Generalized additive models".into()) }).unwrap();
    hl(1, 246.0);
    let neural = e.commit(None, &CommitMode::NewThread { label: Some("Neural additive models".into()) }).unwrap();
    hl(2, 198.0);
    e.commit(None, &CommitMode::ClipTo { target: gams.thread_id.clone() }).unwrap();

    let background = e.create_thread(None, "Background", None).unwrap().value;
    e.move_thread(None, &gams.thread_id, Some(&background), None).unwrap();
    e.move_thread(None, &neural.thread_id, Some(&gams.thread_id), None).unwrap();
    e.move_paper(None, UNORGANIZED_ID, &paper, &background).unwrap();

    e.refresh_recommendations(&gams.thread_id).unwrap();
    let recs = e.refresh_recommendations(&neural.thread_id).unwrap();
    e.add_recommendation(None, &neural.thread_id, &recs.recommendations[0].candidate.paper_id).unwrap();
    e.refresh_recommendations(&neural.thread_id).unwrap();

    fs::read(e.workspace_path()).unwrap()
}

#[test]
fn session_replays_byte_identically() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_session(&fixture_engine(a.path()));
    let second = run_session(&fixture_engine(b.path()));
    assert!(first == second, "workspace files differ between runs");
    let golden = fs::read(fixtures().join("golden/session_workspace.json")).unwrap();
    assert!(first == golden, "workspace differs from the golden file");
    let recs = |d: &Path| fs::read(d.join("recommendations/default/t3.json")).unwrap();
    assert_eq!(recs(a.path()), recs(b.path()));
}

#[test]
fn session_outline_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let e = fixture_engine(dir.path());
    run_session(&e);
    let golden = fs::read_to_string(fixtures().join("golden/session_outline.txt")).unwrap();
    assert_eq!(e.export(None, ExportFormat::Outline).unwrap(), golden);
}

#[test]
fn session_overview_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let e = fixture_engine(dir.path());
    run_session(&e);
    let golden = fs::read_to_string(fixtures().join("golden/session_overview.txt")).unwrap();
    assert_eq!(e.render_overview("t3").unwrap(), golden);
}

#[test]
fn unrecorded_query_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let e = fixture_engine(dir.path());
    e.ingest(&fs::read(fixtures().join("docs/fragmented.json")).unwrap()).unwrap();
    let err = e.open_paper(None, &OpenPaper::Document { doc_id: "doc-fragmented".into() }).unwrap_err();
    assert_eq!(err.code(), "FIXTURE_MISS");
    assert_eq!(e.revision(), 0);
}

#[test]
#[ignore]
fn record() {
    let out = fixtures().join("metadata");
    let _ = fs::remove_dir_all(&out);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = EngineConfig::default();
    cfg.metadata.mode = MetadataMode::Corpus;
    cfg.metadata.corpus = Some(fixtures().join("corpus.json"));
    cfg.metadata.record_dir = Some(out);
    cfg.metadata.requests_per_second = 10_000.0;
    run_session(&Engine::with_config(dir.path(), cfg).unwrap());
}

#[test]
#[ignore]
fn write_golden_workspace() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(fixtures().join("golden/session_workspace.json"), run_session(&fixture_engine(dir.path()))).unwrap();
}
