use std::process::{Command, Output};

use serde_json::Value;

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ramsey-forge")).args(args).env_remove("RAMSEY_FORGE_JOBS").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn axioms_exit_codes() {
    let ok = forge(&["axioms", "--space", "ellentuck", "--ground", "10", "--depth", "3"]);
    assert_eq!(ok.status.code(), Some(0));
    let v = json(&ok);
    assert_eq!((v["schema"].as_u64(), v["kind"].as_str()), (Some(1), Some("axioms")));
    assert_eq!(forge(&["axioms", "--space", "milliken", "--ground", "8", "--depth", "2"]).status.code(), Some(0));
    assert_eq!(forge(&["axioms", "--space", "bogus"]).status.code(), Some(2));
    assert_eq!(forge(&["axioms", "--space", "ellentuck", "--ground", "0"]).status.code(), Some(2));
}

#[test]
fn ramsey_reads_csv_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("parity.csv");
    let mut rows = String::from("a,b,color\n");
    for i in 0..6u64 {
        for j in i + 1..6 {
            rows.push_str(&format!("{i},{j},{}\n", (i + j) % 2));
        }
    }
    std::fs::write(&good, rows).unwrap();
    let out = forge(&["ramsey", "--coloring", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["agree"], Value::Bool(true));
    assert_eq!(v["oracle"]["witness"].as_array().unwrap().len(), 3);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "0 1,0\n0 2,zebra\n").unwrap();
    assert_eq!(forge(&["ramsey", "--coloring", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.csv");
    assert_eq!(forge(&["ramsey", "--coloring", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn failures_exit_one() {
    // evens branching is not cofinite
    let fuse = forge(&["fuse", "--branch", "mod=2; res=[0]"]);
    assert_eq!(fuse.status.code(), Some(1));
    assert!(json(&fuse)["error"].is_string());
    let diag = forge(&["diag", "--branch", "mod=2; res=[0]"]);
    assert_eq!(diag.status.code(), Some(1));
}

#[test]
fn out_flag_writes_file_and_checks_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("germ.json");
    let out = forge(&["germ", "eq", "std:5", "std:5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(v["value"], "True");
    let nowhere = dir.path().join("no/such/dir/x.json");
    assert_eq!(forge(&["germ", "eq", "std:5", "std:5", "--out", nowhere.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn jobs_environment_must_be_a_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_ramsey-forge"))
        .args(["germ", "eq", "std:1", "std:2", "--jobs", "2"])
        .env("RAMSEY_FORGE_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn germ_reports() {
    let v = json(&forge(&["germ", "member", "ql:p=1;base=[0];drift=[1];onset=0", "in", "mod=2;res=[0]"]));
    assert_eq!(v["value"], "Unknown");
    assert_eq!(v["indexSet"], "mod=2; res=[0]; plus=[]; minus=[]");
    let v = json(&forge(&["germ", "apply", "2", "3", "std:4"]));
    assert_eq!(v["result"], "std:11");
    assert_eq!(forge(&["germ", "member", "std:1", "in", "mod=0;res=[]"]).status.code(), Some(2));
}

#[test]
fn unions_and_numbers() {
    let v = json(&forge(&["unions", "--ground", "5", "--coloring", "size-parity"]));
    assert_eq!(v["search"]["recheck"], Value::Bool(true));
    let v = json(&forge(&["rnumber", "unions", "--b", "2", "--max-n", "6"]));
    assert_eq!(v["report"]["value"], 5);
    let v = json(&forge(&["rnumber", "ramsey", "--n", "2", "--k", "3", "--audit"]));
    assert_eq!((v["report"]["value"].as_u64(), v["report"]["audited"].as_bool()), (Some(6), Some(true)));
}
