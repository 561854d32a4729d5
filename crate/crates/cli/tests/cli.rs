use std::process::Command;

use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_attnverify"))
}

fn read_json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let status = bin()
        .args(["verify", "--task", "match2", "--N", "4", "--M", "5", "--seed", "0", "--count", "10", "--out"])
        .arg(&out)
        .env("ATTNVERIFY_WORKERS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    let r = read_json(&out);
    assert_eq!(r["instance_count"], 625);
    assert_eq!(r["exhaustive"], true);
    assert_eq!(r["pass"], true);
}

#[test]
fn worker_count_does_not_change_reports() {
    let run = |workers: &str| {
        let out = bin()
            .args(["verify", "--task", "cycle5", "--N", "7", "--count", "40", "--seed", "2"])
            .env("ATTNVERIFY_WORKERS", workers)
            .output()
            .unwrap();
        assert!(out.status.success());
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["runtime_seconds"] = 0.into();
        v
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = bin().args(["verify", "--task", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown task"));
    let out = bin().args(["verify", "--task", "match2"]).env("ATTNVERIFY_WORKERS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["congest", "--task", "dcycle3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn congest_writes_trace_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (out, csv) = (dir.path().join("trace.json"), dir.path().join("trace.csv"));
    let status = bin()
        .args(["congest", "--task", "match2", "--N", "6", "--seed", "1", "--count", "2", "--out"])
        .arg(&out)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let r = read_json(&out);
    assert_eq!(r["graph"]["task_cut_size"], 6);
    assert_eq!(r["fidelity_failures"], 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
}

#[test]
fn gen_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.json"), dir.path().join("b.json")];
    for p in &paths {
        let status = bin()
            .args(["gen", "--task", "planted-match3", "--N", "64", "--M", "257", "--seed", "1", "--out"])
            .arg(p)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    let status = bin()
        .args(["gen", "--task", "disj-qsa", "--out", "/nonexistent/dir/x.json"])
        .status()
        .unwrap();
    assert!(!status.success());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn exit_status_follows_pass_flag(seed in 0u64..1000) {
        let out = bin()
            .args(["verify", "--task", "match3-local", "--N", "12", "--count", "5", "--seed", &seed.to_string()])
            .output()
            .unwrap();
        let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        prop_assert_eq!(out.status.success(), r["pass"] == true);
    }
}
