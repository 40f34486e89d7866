use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use threadloom_core::engine::{Engine, EngineConfig, MetadataMode};
use tower::ServiceExt;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn app(home: &Path) -> Router {
    let mut cfg = EngineConfig::default();
    cfg.metadata.mode = MetadataMode::Fixture;
    cfg.metadata.fixture_dir = Some(fixtures().join("metadata"));
    threadloom_server::router(Arc::new(Engine::with_config(home, cfg).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn env(payload: Value) -> Value {
    json!({"version": 1, "payload": payload})
}

fn env_at(rev: u64, payload: Value) -> Value {
    json!({"version": 1, "expected_revision": rev, "payload": payload})
}

async fn ok(app: &Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let (status, v) = call(app, method, uri, body).await;
    assert_eq!(status, StatusCode::OK, "{method} {uri}: {v}");
    v
}

async fn ingest_small(app: &Router) {
    let doc: Value = serde_json::from_slice(&fs::read(fixtures().join("docs/doc_small.json")).unwrap()).unwrap();
    ok(app, "POST", "/documents", Some(env(json!({"content": doc})))).await;
}

fn highlight(page: u32, y: f64) -> Value {
    env(json!({"highlight": {"doc_id": "doc-small", "kind": "TEXT", "rects": [{"page": page, "rect": [80.0, y, 200.0, 10.0]}]}}))
}

#[tokio::test]
async fn health_reports_revision() {
    let dir = tempfile::tempdir().unwrap();
    let v = ok(&app(dir.path()), "GET", "/health", None).await;
    assert_eq!(v["version"], 1);
    assert_eq!(v["revision"], 0);
    assert_eq!(v["payload"]["status"], "ok");
}

#[tokio::test]
async fn highlight_matches_answer_file() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    ingest_small(&app).await;
    let answers: Vec<Value> =
        serde_json::from_slice(&fs::read(fixtures().join("docs/doc_small.highlights.json")).unwrap()).unwrap();
    for a in answers {
        let r = &a["rect"];
        let body = env(json!({"highlight": {"doc_id": "doc-small", "kind": "TEXT", "rects": [{"page": a["page"], "rect": r}]}}));
        let v = ok(&app, "POST", "/highlights", Some(body)).await;
        let ctx = &v["payload"]["tank"]["content"]["context"];
        assert_eq!(ctx["core_sentence_indices"], a["core"], "{}", a["name"]);
        assert_eq!(ctx["context_sentence_indices"], a["context"], "{}", a["name"]);
        let got: Vec<Value> = ctx["resolved"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| json!({"key": r["key"], "paper_id": r["paper"]["paper_id"]}))
            .collect();
        let want: Vec<Value> =
            a["refs"].as_array().unwrap().iter().map(|r| json!({"key": r["key"], "paper_id": r["paper_id"]})).collect();
        assert_eq!(got, want, "{}", a["name"]);
    }
}

#[tokio::test]
async fn stale_commit_is_409_and_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    ingest_small(&app).await;
    let v = ok(&app, "POST", "/highlights", Some(highlight(1, 150.0))).await;
    let rev = v["revision"].as_u64().unwrap();
    let before = fs::read(dir.path().join("workspaces/default.json")).unwrap();
    let (status, err) =
        call(&app, "POST", "/tank/commit", Some(env_at(rev - 1, json!({"mode": "NEW_THREAD", "label": "x"})))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["code"], "CONFLICT");
    assert_eq!(fs::read(dir.path().join("workspaces/default.json")).unwrap(), before);
    let v = ok(&app, "POST", "/tank/commit", Some(env_at(rev, json!({"mode": "NEW_THREAD", "label": "x"})))).await;
    assert_eq!(v["revision"], rev + 1);
    assert_eq!(v["payload"]["drawer"]["threads"][1]["label"], "x");
}

#[tokio::test]
async fn concurrent_writers_at_one_revision() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let calls = (0..8).map(|i| {
        let app = app.clone();
        tokio::spawn(async move {
            call(&app, "POST", "/threads", Some(env_at(0, json!({"label": format!("T{i}")})))).await.0
        })
    });
    let mut statuses = vec![];
    for c in calls {
        statuses.push(c.await.unwrap());
    }
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::OK).count(), 1);
    assert_eq!(statuses.iter().filter(|s| **s == StatusCode::CONFLICT).count(), 7);
}

#[tokio::test]
async fn schema_errors_are_422() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (s, v) = call(&app, "POST", "/threads", Some(json!({"version": 1, "payload": {"lable": "x"}}))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("SCHEMA_ERROR")));
    let (s, v) = call(&app, "POST", "/threads", Some(json!({"version": 9, "payload": {"label": "x"}}))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("UNSUPPORTED_VERSION")));
    let (s, v) = call(&app, "POST", "/threads", Some(env(json!({"label": "  "})))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("INVALID_LABEL")));
    let (s, v) = call(&app, "GET", "/threads/t99", None).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::NOT_FOUND, Some("NO_SUCH_THREAD")));
}

#[tokio::test]
async fn request_ids_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let body = json!({"version": 1, "request_id": "abc", "payload": {"label": "x"}});
    assert_eq!(ok(&app, "POST", "/threads", Some(body)).await["request_id"], "abc");
    let body = json!({"version": 1, "request_id": "def", "expected_revision": 0, "payload": {"label": "y"}});
    assert_eq!(call(&app, "POST", "/threads", Some(body)).await.1["request_id"], "def");
}

#[tokio::test]
async fn area_highlight_round_trips_image() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    ingest_small(&app).await;
    let png = vec![42u8; 10 * 1024];
    let b64 = base64::engine::general_purpose::STANDARD.encode(&png);
    let area = |img: String| {
        env(json!({
            "highlight": {"doc_id": "doc-small", "kind": "AREA", "rects": [{"page": 2, "rect": [144.0, 600.0, 400.0, 240.0]}]},
            "transform": {"render_scale": 2.0},
            "image_base64": img,
        }))
    };
    let v = ok(&app, "POST", "/highlights", Some(area(format!("data:image/png;base64,{b64}")))).await;
    let content = &v["payload"]["tank"]["content"];
    assert_eq!(content["type"], "IMAGE");
    assert_eq!(content["rect"]["rect"], json!([72.0, 300.0, 200.0, 120.0]));
    let sha = content["image_sha256"].as_str().unwrap().to_string();
    ok(&app, "POST", "/tank/commit", Some(env(json!({"mode": "NEW_THREAD"})))).await;
    let resp = app.clone().oneshot(Request::get(format!("/assets/{sha}")).body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.into_body().collect().await.unwrap().to_bytes().to_vec(), png);

    let big = base64::engine::general_purpose::STANDARD.encode(vec![0u8; 3 << 20]);
    let (s, v) = call(&app, "POST", "/highlights", Some(area(big))).await;
    assert_eq!((s, v["error"]["code"].as_str()), (StatusCode::PAYLOAD_TOO_LARGE, Some("PAYLOAD_TOO_LARGE")));
}

/// The same scripted session the engine and command-line tests run.
#[tokio::test]
async fn scripted_session_reproduces_golden_workspace() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    ingest_small(&app).await;
    let paper = ok(&app, "POST", "/papers/open", Some(env(json!({"doc_id": "doc-small"})))).await["payload"]["identity"].clone();

    ok(&app, "POST", "/highlights", Some(highlight(1, 150.0))).await;
    let gams = ok(&app, "POST", "/tank/commit", Some(env(json!({"mode": "NEW_THREAD", "label": "Generalized additive models"})))).await;
    let gams = gams["payload"]["thread_id"].as_str().unwrap().to_string();
    ok(&app, "POST", "/highlights", Some(highlight(1, 246.0))).await;
    let neural = ok(&app, "POST", "/tank/commit", Some(env(json!({"mode": "NEW_THREAD", "label": "Neural additive models"})))).await;
    let neural = neural["payload"]["thread_id"].as_str().unwrap().to_string();
    ok(&app, "POST", "/highlights", Some(highlight(2, 198.0))).await;
    ok(&app, "POST", "/tank/commit", Some(env(json!({"mode": "CLIP_TO", "target": gams})))).await;

    let bg = ok(&app, "POST", "/threads", Some(env(json!({"label": "Background"})))).await["payload"]["thread_id"].clone();
    ok(&app, "POST", &format!("/threads/{gams}/move"), Some(env(json!({"parent": bg})))).await;
    ok(&app, "POST", &format!("/threads/{neural}/move"), Some(env(json!({"parent": gams})))).await;
    ok(&app, "POST", "/threads/unorganized/papers/move", Some(env(json!({"identity": paper, "to": bg})))).await;

    ok(&app, "POST", &format!("/threads/{gams}/recommendations/refresh"), Some(env(json!({})))).await;
    let recs = ok(&app, "POST", &format!("/threads/{neural}/recommendations/refresh"), Some(env(json!({})))).await;
    let first = recs["payload"]["recommendations"][0]["candidate"]["paper_id"].clone();
    ok(&app, "POST", &format!("/threads/{neural}/recommendations/add"), Some(env(json!({"paper_id": first})))).await;
    let recs = ok(&app, "POST", &format!("/threads/{neural}/recommendations/refresh"), Some(env(json!({})))).await;
    assert_eq!(recs["revision"], 12);

    let golden = fs::read(fixtures().join("golden/session_workspace.json")).unwrap();
    assert!(fs::read(dir.path().join("workspaces/default.json")).unwrap() == golden);

    let overview = ok(&app, "GET", &format!("/threads/{neural}/overview"), None).await;
    assert_eq!(overview["payload"]["recommendations_revision"], 12);
    let export = ok(&app, "GET", "/export?format=outline", None).await;
    let outline = fs::read_to_string(fixtures().join("golden/session_outline.txt")).unwrap();
    assert_eq!(export["payload"]["content"], outline);
}
