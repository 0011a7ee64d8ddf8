mod runner;

use runner::*;
use sha2::{Digest, Sha256};

#[test]
fn seeded_runs_are_byte_identical() {
    assert_eq!(determinism_mismatches(), Vec::<String>::new());
}

#[test]
fn manifest_records_inputs_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let (bytes, m) = run_to(dir.path(), "c", &["cluster", "-i", "{v}", "--seed", "3", "--k-max", "5"]);
    assert_eq!(m["command"], "cluster");
    assert_eq!(m["seed"], 3);
    assert_eq!(m["params"]["k_max"], 5);
    assert_eq!(m["output_sha256"], hex::encode(Sha256::digest(&bytes)));
    let inputs = m["inputs"].as_object().unwrap();
    assert_eq!(inputs.len(), 1);
    let fixture_bytes = std::fs::read(fixture("ventures.csv")).unwrap();
    assert_eq!(inputs.values().next().unwrap(), &hex::encode(Sha256::digest(&fixture_bytes)));
    assert!(m["tool_version"].as_str().unwrap().starts_with("bmguide "));
}

#[test]
fn train_output_loads_as_model_document() {
    let dir = tempfile::tempdir().unwrap();
    let (bytes, _) = run_to(dir.path(), "m", &["train", "-i", "{v}", "--seed", "1", "--n-trees", "20"]);
    let doc = bmguide_core::learn::ModelDocument::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(doc.model.family(), "random_forest");
    let model = dir.path().join("m.out");
    let o = bmguide(&["importance", "--model", model.to_str().unwrap(), "--top", "3"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 3);
}

#[test]
fn stdout_matches_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let (bytes, _) = run_to(dir.path(), "s", &["synth", "--seed", "2", "-n", "10"]);
    let o = bmguide(&["synth", "--seed", "2", "-n", "10"]);
    assert_eq!(o.stdout, bytes);
}

#[test]
fn exit_codes() {
    assert_eq!(bmguide(&["--help"]).status.code(), Some(0));
    assert_eq!(bmguide(&["--version"]).status.code(), Some(0));
    assert_eq!(bmguide(&["nonsense"]).status.code(), Some(2));
    assert_eq!(bmguide(&["cluster", "-i", "x.csv"]).status.code(), Some(2), "missing --seed");
    assert_eq!(bmguide(&["encode", "-i", "/no/such/file.csv"]).status.code(), Some(2));
    let v = fixture("ventures.csv");
    let v = v.to_str().unwrap();
    let o = bmguide(&["cluster", "-i", v, "--seed", "1", "--component", "Nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Revenues"));
    let q = fixture("cases.csv");
    let o = bmguide(&["qca", "-i", q.to_str().unwrap(), "--expect", "present,absent"]);
    assert_eq!(o.status.code(), Some(2), "two expectations for four conditions");
    // the case table is not a venture table
    assert_eq!(bmguide(&["encode", "-i", q.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn invalid_venture_is_rejected_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("ventures.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut broken: Vec<String> = lines[1].split(',').map(str::to_string).collect();
    let id = broken[0].clone();
    broken[1] = "Not A Characteristic".into();
    lines[1] = broken.join(",");
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, lines.join("\n")).unwrap();
    let o = bmguide(&["encode", "-i", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&id), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn crowd_lanes_join_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let v = fixture("ventures.csv");
    let text = std::fs::read_to_string(&v).unwrap();
    let mut crowd = String::from("venture_id,mentors\n");
    for line in text.lines().skip(1) {
        let id = line.split(',').next().unwrap();
        let label = line.rsplit(',').next().unwrap();
        // a lane that mostly agrees with the label
        let p = if label == "1" { 0.8 } else { 0.3 };
        crowd.push_str(&format!("{id},{p}\n"));
    }
    let path = dir.path().join("crowd.csv");
    std::fs::write(&path, crowd).unwrap();
    let o = bmguide(&[
        "evaluate", "-i", v.to_str().unwrap(), "--seed", "1", "--n-trees", "20", "--folds", "4",
        "--crowd", path.to_str().unwrap(), "--format", "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let table = r["table"].to_string();
    assert!(table.contains("\"mentors\""));
    assert!(r["report"].is_object());
}
