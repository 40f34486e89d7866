mod common;

use std::fs;

use common::*;

#[test]
fn suggest_on_empty_workspace_is_empty() {
    let home = tempfile::tempdir().unwrap();
    init_fixture_home(home.path());
    let v = ok_json(home.path(), &["suggest", "anything at all"]);
    assert_eq!(v, serde_json::json!([]));
}

#[test]
fn scripted_session_reproduces_golden_files() {
    let home = tempfile::tempdir().unwrap();
    let ws = run_session(home.path());
    let golden = fs::read(fixtures().join("golden/session_workspace.json")).unwrap();
    assert!(ws == golden, "workspace differs from the golden file");
    let outline = ok(home.path(), &["export", "--format", "outline"]);
    assert_eq!(outline, fs::read_to_string(fixtures().join("golden/session_outline.txt")).unwrap());
    let overview = ok(home.path(), &["overview", "t3"]);
    assert_eq!(overview, fs::read_to_string(fixtures().join("golden/session_overview.txt")).unwrap());
}

#[test]
fn errors_carry_codes_and_exit_status() {
    let home = tempfile::tempdir().unwrap();
    init_fixture_home(home.path());
    let out = threadloom(home.path(), &["--output", "json", "thread", "mv", "t9"]);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["code"], "NO_SUCH_THREAD");

    ok(home.path(), &["thread", "new", "A"]);
    let out = threadloom(home.path(), &["--expect-revision", "0", "thread", "new", "B"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[CONFLICT]"));

    let out = threadloom(home.path(), &["tank", "commit", "--new"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EMPTY_COMMIT"));
}

#[test]
fn fixture_miss_is_reported() {
    let home = tempfile::tempdir().unwrap();
    init_fixture_home(home.path());
    let doc = fixtures().join("docs/fragmented.json");
    let v = ok_json(home.path(), &["ingest", doc.to_str().unwrap()]);
    assert_eq!(v["merged_fragments"], 12);
    let out = threadloom(home.path(), &["--output", "json", "open", "doc-fragmented"]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["code"], "FIXTURE_MISS");
}

#[test]
fn thread_management_round_trip() {
    let home = tempfile::tempdir().unwrap();
    init_fixture_home(home.path());
    let h = home.path();
    ok(h, &["thread", "new", "A"]);
    ok(h, &["thread", "new", "B", "--parent", "t1"]);
    ok(h, &["thread", "rename", "t2", "B2"]);
    assert_eq!(ok(h, &["export", "t1"]), "- A [t1]\n  - B2 [t2]\n");
    ok(h, &["thread", "mv", "t2"]);
    let d = ok_json(h, &["thread", "ls"]);
    assert_eq!(d["threads"].as_array().unwrap().len(), 3);
    ok(h, &["paper", "add", "t1", "--title", "Some Paper", "--year", "2020"]);
    assert!(!threadloom(h, &["thread", "rm", "t1"]).status.success());
    ok(h, &["thread", "rm", "t1", "--confirm"]);
    assert_eq!(ok_json(h, &["thread", "ls"])["threads"].as_array().unwrap().len(), 2);
}

#[test]
fn init_refuses_to_overwrite() {
    let home = tempfile::tempdir().unwrap();
    init_fixture_home(home.path());
    let out = threadloom(home.path(), &["init", "--metadata", "offline"]);
    assert_eq!(out.status.code(), Some(2));
    ok(home.path(), &["init", "--metadata", "offline", "--force"]);
}
