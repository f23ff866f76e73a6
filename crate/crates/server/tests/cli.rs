mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use common::*;
use serde_json::Value;

const SESSION_FILES: [&str; 4] = ["session.json", "diagram.json", "events.jsonl", "dataset.csv"];

fn bundled() -> PathBuf {
    fixtures().join("sessions/p5")
}

fn hypotree(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hypotree")).args(args).env("RUST_LOG", "off").output().unwrap()
}

fn copy_session(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for f in SESSION_FILES {
        std::fs::copy(from.join(f), to.join(f)).unwrap();
    }
}

#[tokio::test]
async fn bundled_fixture_is_the_mock_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    {
        let (app, _) = app_with(mock_config(dir.path()));
        p5_walkthrough(&app, "p5").await;
    }
    let fresh = dir.path().join("p5");
    if std::env::var_os("HYPOTREE_BLESS").is_some() {
        copy_session(&fresh, &bundled());
    }
    for f in SESSION_FILES {
        assert_eq!(
            std::fs::read(fresh.join(f)).unwrap(),
            std::fs::read(bundled().join(f)).unwrap(),
            "{f} differs from the bundled fixture"
        );
    }
}

#[test]
fn analyze_json_has_table_shapes() {
    let out = hypotree(&["analyze", bundled().to_str().unwrap(), "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let bt = &doc["tables"]["backtracks"];
    assert_eq!(
        bt["columns"],
        serde_json::json!(["ID", "High Level Backtrack and Generate", "High Level Backtrack Only", "Other Backtrack", "Total"])
    );
    let rows = bt["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["ID"], "p5");
    let sum: u64 = ["High Level Backtrack and Generate", "High Level Backtrack Only", "Other Backtrack"]
        .iter()
        .map(|c| rows[0][*c].as_u64().unwrap())
        .sum();
    assert_eq!(rows[0]["Total"].as_u64().unwrap(), sum);
    assert!(rows[0]["High Level Backtrack and Generate"].as_u64().unwrap() >= 1);
    let eng = &doc["tables"]["engagement"];
    assert_eq!(
        eng["columns"],
        serde_json::json!(["ID", "Initial expansion of visual hypotheses", "Re-expansion of visual hypotheses", "Total"])
    );
    assert_eq!(doc["reports"][0]["session_id"], "p5");
}

#[test]
fn analyze_csv_has_table_shapes() {
    let out = hypotree(&["analyze", bundled().to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let blocks: Vec<&str> = text.split("\n\n").collect();
    assert_eq!(blocks.len(), 2, "{text}");
    let bt: Vec<&str> = blocks[0].lines().collect();
    assert_eq!(bt[0], "ID,High Level Backtrack and Generate,High Level Backtrack Only,Other Backtrack,Total");
    assert_eq!(bt.len(), 2);
    assert!(bt[1].starts_with("p5,"));
    let eng: Vec<&str> = blocks[1].lines().collect();
    assert_eq!(eng[0], "ID,Initial expansion of visual hypotheses,Re-expansion of visual hypotheses,Total");
    assert!(eng[1].starts_with("p5,"));
}

#[test]
fn analyze_many_sessions_gives_one_row_each() {
    let dir = tempfile::tempdir().unwrap();
    for id in ["a", "b"] {
        let copy = dir.path().join(id);
        copy_session(&bundled(), &copy);
        let meta = std::fs::read_to_string(copy.join("session.json")).unwrap();
        std::fs::write(copy.join("session.json"), meta.replace("\"session_id\": \"p5\"", &format!("\"session_id\": \"{id}\""))).unwrap();
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = hypotree(&["analyze", a.to_str().unwrap(), b.to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let first: Vec<&str> = text.split("\n\n").next().unwrap().lines().collect();
    assert_eq!(first.len(), 3);
    assert!(first[1].starts_with("a,") && first[2].starts_with("b,"));
}

#[test]
fn replay_of_intact_fixture_succeeds() {
    let out = hypotree(&["replay", bundled().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["diagram_identical"], true);
}

#[test]
fn truncated_log_exits_with_corrupt_log() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("p5");
    copy_session(&bundled(), &copy);
    let log = std::fs::read(copy.join("events.jsonl")).unwrap();
    std::fs::write(copy.join("events.jsonl"), &log[..log.len() - 40]).unwrap();
    for cmd in ["analyze", "replay"] {
        let out = hypotree(&[cmd, copy.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"], "CorruptLog");
    }
}

#[test]
fn edited_diagram_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("p5");
    copy_session(&bundled(), &copy);
    let text = std::fs::read_to_string(copy.join("diagram.json")).unwrap();
    std::fs::write(copy.join("diagram.json"), text.replacen("Education Level", "Education Levels", 1)).unwrap();
    let out = hypotree(&["replay", copy.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ReplayMismatch");
}

#[test]
fn missing_directory_is_a_json_error() {
    let out = hypotree(&["analyze", "/nonexistent/session"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "NotASessionDir");
}

#[test]
fn export_bundles_diagram_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("p5-export.json");
    let out = hypotree(&["export", bundled().to_str().unwrap(), out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let diagram: Value =
        serde_json::from_str(&std::fs::read_to_string(bundled().join("diagram.json")).unwrap()).unwrap();
    assert_eq!(doc["diagram"], diagram);
    assert_eq!(doc["report"]["session_id"], "p5");
    assert_eq!(doc["session"]["intent_text"], "income inequality");
}
