//! The command-line runner: exit codes, file outputs, and agreement with
//! the HTTP service.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

use agent_causal::experiments::QueryTable;
use agent_causal::sim::read_trace;
use agent_causal_cli::service::{Request, Service};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agent-causal")).args(args).env_remove("AGENT_CAUSAL_DATA").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn experiment_writes_the_same_table_as_the_service() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mimic.json");
    let o = bin(&["experiment", "mimic", "--rollouts", "200", "--seed", "9", "--out", path(&out), "--format", "text"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().contains("P(L=b|do(R=l),B=r)"));
    let from_file: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let served = Service::in_memory().handle(Request::post("/experiments/mimic/run", json!({ "rollouts": 200, "seed": 9 })));
    assert_eq!(served.status, 200);
    assert_eq!(from_file, served.body);
}

#[test]
fn zero_rollouts_give_prior_means() {
    let o = bin(&["experiment", "grass-sand", "--rollouts", "0"]);
    assert_eq!(code(&o), 0);
    let table: QueryTable = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((table.rows.len(), table.columns.len()), (6, 2));
    for row in &table.rows {
        for v in row.values.values() {
            assert_eq!(*v, 0.5, "{}", row.label);
        }
    }
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("gated.json");
    assert_eq!(code(&bin(&["experiment", "gated-room", "--out", path(&table)])), 0);
    let o = bin(&["verify", "--reference", "scripted", "--table", path(&table)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("PASS gated-room"));

    // A prior-mean table misses the scripted values.
    let blank = dir.path().join("blank.json");
    assert_eq!(code(&bin(&["experiment", "gated-room", "--rollouts", "0", "--out", path(&blank)])), 0);
    let o = bin(&["verify", "--reference", "scripted", "--table", path(&blank)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("FAIL gated-room"));

    // A user reference file with its own tolerances.
    let table_json: QueryTable = serde_json::from_str(&std::fs::read_to_string(&blank).unwrap()).unwrap();
    let reference = dir.path().join("ref.json");
    let set = json!({ "tables": { "gated-room": { "columns": table_json.columns, "rows": table_json.rows } } });
    std::fs::write(&reference, set.to_string()).unwrap();
    assert_eq!(code(&bin(&["verify", "--reference", path(&reference), "--table", path(&blank)])), 0);
    let tight = dir.path().join("tol.json");
    std::fs::write(&tight, json!({ "default": 0.0 }).to_string()).unwrap();
    assert_eq!(code(&bin(&["verify", "--reference", path(&reference), "--tolerances", path(&tight), "--table", path(&table)])), 1);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&bin(&["experiment", "no-such-experiment"])), 2);
    assert_eq!(code(&bin(&["verify", "--reference", "nowhere.json"])), 2);
    assert_eq!(code(&bin(&["simulate", "--env", "grass-sand", "--agent", "mimic/leader"])), 2);
    assert_eq!(code(&bin(&["frobnicate"])), 2);
    assert_eq!(code(&bin(&["query", "--model", "missing.json", "--query", "{}"])), 2);
}

#[test]
fn simulate_writes_a_readable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.jsonl");
    let intervention = json!({ "time": 2, "kind": "reseed", "seed": { "value": 77 } }).to_string();
    let o = bin(&[
        "simulate", "--env", "mimic", "--agent", "mimic/leader", "--agent", "mimic/imitator", "--seed", "3", "--steps", "5",
        "--intervention", &intervention, "--out", path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let trace = read_trace(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert_eq!(trace.interventions.len(), 1);
    assert!(trace.parent.is_some());

    let o = bin(&["simulate", "--env", "mimic", "--agent", "mimic/leader", "--agent", "mimic/imitator", "--seed", "3", "--steps", "5"]);
    let root = read_trace(o.stdout.as_slice()).unwrap();
    assert_eq!(root.len(), 5);
    assert_eq!(trace.steps[0], root.steps[0]);
}

#[test]
fn query_answers_from_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let scm = json!({
        "kind": "scm",
        "variables": [{ "name": "X", "domain": ["0", "1"] }, { "name": "Y", "domain": ["0", "1"] }],
        "parents": { "X": [], "Y": ["X"] },
        "cpts": { "X": [[0.4, 0.6]], "Y": [[0.9, 0.1], [0.2, 0.8]] }
    });
    std::fs::write(&model, scm.to_string()).unwrap();
    let q = json!({ "level": "associational", "target": { "Y": "1" } }).to_string();
    let o = bin(&["query", "--model", path(&model), "--query", &q]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let answer: Value = serde_json::from_slice(&o.stdout).unwrap();
    let p = answer["probability"].as_f64().unwrap();
    assert!((p - (0.4 * 0.1 + 0.6 * 0.8)).abs() < 1e-12);
    let zero = json!({ "level": "associational", "target": { "Y": "1" }, "evidence": { "X": "2" } }).to_string();
    assert_eq!(code(&bin(&["query", "--model", path(&model), "--query", &zero])), 2);
}
