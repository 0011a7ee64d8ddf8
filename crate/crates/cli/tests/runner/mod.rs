//! Runs the built `bmguide` binary against the workspace fixtures.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn bmguide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmguide")).args(args).output().expect("binary runs")
}

/// Seeded invocations covering every batch subcommand; `{v}` and `{q}`
/// stand for the venture and case fixtures.
pub const SEEDED_RUNS: &[&[&str]] = &[
    &["synth", "--seed", "5", "-n", "80"],
    &["encode", "-i", "{v}"],
    &["cluster", "-i", "{v}", "--seed", "3", "--k-max", "8"],
    &["cluster", "-i", "{v}", "--seed", "3", "--k-max", "6", "--component", "Revenues", "--format", "json"],
    &["archetypes", "-i", "{v}", "--seed", "2", "--component-k-max", "6", "--success-k-max", "6"],
    &["train", "-i", "{v}", "--seed", "9", "--n-trees", "100"],
    &["train", "-i", "{v}", "--seed", "9", "--family", "logistic"],
    &["importance", "-i", "{v}", "--seed", "9", "--n-trees", "100", "--format", "json"],
    &["evaluate", "-i", "{v}", "--seed", "4", "--n-trees", "40", "--folds", "5"],
    &["qca", "-i", "{q}"],
    &["qca", "-i", "{q}", "--format", "json", "--consistency", "0.8"],
    &["simulate-crowd", "--seed", "8", "--quality", "6.5", "--rounds", "3"],
];

/// Runs `args` with `--output` into `dir`; returns the output bytes and the
/// sidecar manifest.
pub fn run_to(dir: &Path, tag: &str, args: &[&str]) -> (Vec<u8>, serde_json::Value) {
    let v = fixture("ventures.csv");
    let q = fixture("cases.csv");
    let out = dir.join(format!("{tag}.out"));
    let mut full: Vec<String> = args
        .iter()
        .map(|a| match *a {
            "{v}" => v.display().to_string(),
            "{q}" => q.display().to_string(),
            other => other.to_string(),
        })
        .collect();
    full.extend(["--output".into(), out.display().to_string()]);
    let refs: Vec<&str> = full.iter().map(String::as_str).collect();
    let o = bmguide(&refs);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(&out).unwrap();
    let manifest = std::fs::read_to_string(dir.join(format!("{tag}.out.manifest.json"))).unwrap();
    (bytes, serde_json::from_str(&manifest).unwrap())
}

/// Every seeded run twice in separate directories; the mismatching runs.
pub fn determinism_mismatches() -> Vec<String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    for (i, args) in SEEDED_RUNS.iter().enumerate() {
        let tag = format!("run{i}");
        let (x, mx) = run_to(a.path(), &tag, args);
        let (y, my) = run_to(b.path(), &tag, args);
        if x != y || mx["output_sha256"] != my["output_sha256"] || mx["params"] != my["params"] || mx["inputs"] != my["inputs"] {
            bad.push(args.join(" "));
        }
    }
    bad
}
