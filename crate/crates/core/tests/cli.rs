mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::program_file;

fn parasync(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parasync"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PARASYNC_SEED")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_writes_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &["analyze", "--input", &program_file("acyclic.loop")],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let g = read_json(&dir.path().join("depgraph.json"));
    assert_eq!(g["edges"].as_array().unwrap().len(), 5);
    let dot = std::fs::read_to_string(dir.path().join("depgraph.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
}

#[test]
fn emit_filters_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &[
            "transform",
            "--input",
            &program_file("acyclic.loop"),
            "--locality",
            "--emit",
            "loop",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(!dir.path().join("scc.json").exists());
    let text = std::fs::read_to_string(dir.path().join("transformed.loop")).unwrap();
    assert_eq!(text.matches("for (parallel").count(), 3);
}

#[test]
fn transform_reports_cycles() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &["transform", "--input", &program_file("recurrence.loop")],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("parasync sync"));
}

#[test]
fn sync_and_optimize() {
    let dir = tempfile::tempdir().unwrap();
    let input = program_file("redundant_sync.loop");
    for method in ["isd", "pattern", "both"] {
        let out = parasync(
            &["sync", "--input", &input, "--optimize", "--method", method],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{method}");
        let text = std::fs::read_to_string(dir.path().join("sync.loop")).unwrap();
        assert_eq!(text.matches("send(").count(), 1, "{method}");
        assert!(dir.path().join("elim.json").exists());
        assert!(dir.path().join("isd.dot").exists());
    }
}

#[test]
fn synced_output_simulates_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &["sync", "--input", &program_file("recurrence.loop")],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let synced = dir.path().join("sync.loop");
    let sim = tempfile::tempdir().unwrap();
    let out = parasync(
        &[
            "simulate",
            "--input",
            synced.to_str().unwrap(),
            "--seeds",
            "50",
            "--policy",
            "adversarial",
            "--trace",
        ],
        sim.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let report = read_json(&sim.path().join("sim.json"));
    assert_eq!(report["runs"], 150);
    assert_eq!(report["failed"], 0);
    assert!(sim.path().join("trace.txt").exists());
}

#[test]
fn racy_program_exits_four_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &[
            "simulate",
            "--input",
            &program_file("recurrence.loop"),
            "--seeds",
            "200",
            "--threads",
            "2",
            "--policy",
            "adversarial",
            "--dist",
            "block",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    let report = read_json(&dir.path().join("sim.json"));
    assert!(report["failed"].as_u64().unwrap() > 0);
    assert_eq!(report["distribution"], "BLOCK");
}

#[test]
fn nothing_to_sync_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("flat.loop");
    std::fs::write(&src, "for (i=1; i<n; i++) { S1: a[i] = b[i] + 1; }\n").unwrap();
    let out = parasync(&["sync", "--input", src.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn one_iteration_simulates() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &[
            "simulate",
            "--input",
            &program_file("recurrence.loop"),
            "--n",
            "1",
            "--seeds",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn parse_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("bad.loop");
    std::fs::write(&src, "for (i=1; i<n; i+=2) { S1: a[i] = 1; }\n").unwrap();
    let out = parasync(&["analyze", "--input", src.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.loop:1:"));
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(&["analyze", "--input", "/no/such/file.loop"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("flat.loop");
    std::fs::write(&src, "for (i=1; i<n; i++) { S1: a[i] = b[i] + 1; }\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_parasync"))
        .args([
            "simulate",
            "--input",
            src.to_str().unwrap(),
            "--seeds",
            "3",
            "--out",
        ])
        .arg(dir.path())
        .env("PARASYNC_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&dir.path().join("sim.json"))["base_seed"], 42);
}

#[test]
fn empty_body_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("empty.loop");
    std::fs::write(&src, "for (i=1; i<n; i++) { }\n").unwrap();
    let out = parasync(&["analyze", "--input", src.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_both_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out = parasync(
        &[
            "sync",
            "--input",
            &program_file("redundant_sync.loop"),
            "--optimize",
            "--method",
            "both",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let elim = read_json(&dir.path().join("elim.json"));
    assert_eq!(elim["agreement"], true);
    for method in ["reduction", "pattern"] {
        let gone = elim[method]["eliminated"].as_array().unwrap();
        assert_eq!(gone.len(), 1);
        assert_eq!(gone[0]["dep"]["array"], "a");
    }
}

#[test]
fn artifacts_are_byte_stable() {
    let input = program_file("recurrence.loop");
    let run = |cmd: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = parasync(
            &[cmd, "--input", &input, "--optimize", "--seeds", "20"],
            dir.path(),
        );
        let mut names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        let files: Vec<(std::ffi::OsString, Vec<u8>)> = names
            .into_iter()
            .map(|n| (n.clone(), std::fs::read(dir.path().join(&n)).unwrap()))
            .collect();
        (out.status.code(), files)
    };
    for cmd in ["analyze", "transform", "sync", "simulate"] {
        let first = run(cmd);
        assert!(!first.1.is_empty(), "{cmd}");
        assert_eq!(first, run(cmd), "{cmd}");
    }
}

#[test]
fn sync_output_reanalyzes_to_the_same_dependences() {
    let dir = tempfile::tempdir().unwrap();
    let input = program_file("recurrence.loop");
    assert_eq!(
        parasync(&["sync", "--input", &input], dir.path())
            .status
            .code(),
        Some(0)
    );
    let synced =
        parasync::dsl::parse(&std::fs::read_to_string(dir.path().join("sync.loop")).unwrap())
            .unwrap();
    let original = common::load_loop("recurrence.loop");
    assert_eq!(synced.loops[0].syncs.len(), 8);
    assert_eq!(
        parasync::depend::analyze(&synced.loops[0]),
        parasync::depend::analyze(&original)
    );
}
