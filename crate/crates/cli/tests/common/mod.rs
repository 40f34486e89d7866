#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Runs the binary against `home` with networking pointed nowhere.
pub fn threadloom(home: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_threadloom"))
        .args(args)
        .env("THREADLOOM_HOME", home)
        .env("HTTP_PROXY", "http://127.0.0.1:9")
        .env("HTTPS_PROXY", "http://127.0.0.1:9")
        .env("ALL_PROXY", "http://127.0.0.1:9")
        .env_remove("THREADLOOM_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn ok(home: &Path, args: &[&str]) -> String {
    let out = threadloom(home, args);
    assert!(
        out.status.success(),
        "threadloom {args:?} failed: {}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn ok_json(home: &Path, args: &[&str]) -> Value {
    let mut full = vec!["--output", "json"];
    full.extend_from_slice(args);
    serde_json::from_str(&ok(home, &full)).unwrap()
}

pub fn init_fixture_home(home: &Path) {
    let fx = fixtures().join("metadata");
    ok(home, &["init", "--metadata", "fixture", "--fixture-dir", fx.to_str().unwrap()]);
}

/// The scripted demo session; returns the final workspace file.
pub fn run_session(home: &Path) -> Vec<u8> {
    init_fixture_home(home);
    let doc = fixtures().join("docs/doc_small.json");
    ok(home, &["ingest", doc.to_str().unwrap()]);
    let paper = ok_json(home, &["open", "doc-small"])["identity"].as_str().unwrap().to_string();

    ok(home, &["extract", "doc-small", "--page", "1", "--rect", "80,150,200,10"]);
    let gams = ok_json(home, &["tank", "commit", "--new", "Generalized additive models"])["thread_id"].as_str().unwrap().to_string();
    ok(home, &["extract", "doc-small", "--page", "1", "--rect", "80,246,200,10"]);
    let neural = ok_json(home, &["tank", "commit", "--new", "Neural additive models"])["thread_id"].as_str().unwrap().to_string();
    ok(home, &["extract", "doc-small", "--page", "2", "--rect", "80,198,200,10"]);
    ok(home, &["tank", "commit", "--clip-to", &gams]);

    let bg = ok_json(home, &["thread", "new", "Background"])["thread_id"].as_str().unwrap().to_string();
    ok(home, &["thread", "mv", &gams, "--parent", &bg]);
    ok(home, &["thread", "mv", &neural, "--parent", &gams]);
    ok(home, &["paper", "mv", "unorganized", &paper, &bg]);

    ok(home, &["recommend", &gams, "--refresh"]);
    let recs = ok_json(home, &["recommend", &neural, "--refresh"]);
    let first = recs["recommendations"][0]["candidate"]["paper_id"].as_str().unwrap().to_string();
    ok(home, &["recommend", &neural, "--add", &first]);
    ok(home, &["recommend", &neural, "--refresh"]);

    std::fs::read(home.join("workspaces/default.json")).unwrap()
}
