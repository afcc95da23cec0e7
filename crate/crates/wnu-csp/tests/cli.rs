//! End-to-end checks of the command-line surface and its exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wnu-csp"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data").join(name)
}

#[test]
fn solve_reports_unsat_with_exit_20() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("e1.trace");
    let out = bin()
        .args(["solve"])
        .arg(data("example1.json"))
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(20));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no solution"));
    assert!(trace.exists());

    let check = bin()
        .args(["check"])
        .arg(data("example1.json"))
        .arg(&trace)
        .arg("--semantic")
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&check.stdout).contains("ACCEPT"));
}

#[test]
fn solve_reports_sat_with_exit_0_and_check_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("e2.trace");
    let out = bin()
        .args(["solve"])
        .arg(data("example2.json"))
        .arg("--trace")
        .arg(&trace)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(v["answer"], "yes");

    let text = fs::read_to_string(&trace).unwrap();
    let tampered = text.replace("\"value\":\"yes\"", "\"value\":\"no\"");
    assert_ne!(text, tampered);
    let bad = dir.path().join("tampered.trace");
    fs::write(&bad, tampered.replace(",\"assignment\":[0,1,0]", "")).unwrap();
    let check = bin()
        .args(["check"])
        .arg(data("example2.json"))
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(check.status.code(), Some(1));
}

#[test]
fn gen_is_reproducible_and_solvable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = bin()
            .args(["gen", "z3", "--n", "4", "--seed", "7", "-o"])
            .arg(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());
    let out = bin().args(["solve"]).arg(&a).output().unwrap();
    assert!(matches!(out.status.code(), Some(0) | Some(20)));
}

#[test]
fn unknown_template_and_missing_file_exit_2() {
    let out = bin().args(["gen", "nosuch"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["solve", "/nonexistent/instance.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cnf_emits_dimacs_and_analyze_prints_profile() {
    let out = bin().args(["cnf"]).arg(data("example1.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("p cnf 6 12"));
    assert!(text.contains("c var 1 = h(0,"));

    let out = bin().args(["analyze"]).arg(data("example2.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("special WNU: yes"));
    assert!(text.contains("LinearQuotient(Δ, [2])"));
}
