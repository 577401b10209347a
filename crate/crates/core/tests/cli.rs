use std::path::Path;
use std::process::{Command, Output};

fn strat_rk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strat-rk")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["list-methods", "order", "converge", "converge-weak", "trajectory", "invariants"] {
        let out = strat_rk(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub}");
    }
    assert_eq!(code(&strat_rk(&["--help"])), 0);
    assert_eq!(code(&strat_rk(&[])), 1);
}

#[test]
fn order_reports_floor_rule() {
    let out = strat_rk(&["order", "--method", "gauss2"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("p_d=4, sde order=2\n"), "{text}");
    assert!(text.contains("first failing tree: [•,•,•,•]"), "{text}");
}

#[test]
fn tableau_file_is_loadable() {
    let file = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/lobatto_iiic3.json");
    let out = strat_rk(&["order", "--method", "lobatto_iiic3", "--tableau-file", file, "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["p_d"], 4);
    assert_eq!(v[0]["sde_order"], 2);
}

fn converge_args<'a>(out: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "converge", "--problem", "sinh", "--sigma", "0.8", "--method", "gauss1,gauss2", "--paths", "200",
        "--seed", "42", "--finest-level", "7", "--levels", "3-7", "--out", out, "--workers", workers,
    ]
}

#[test]
fn identical_invocations_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let (a_s, b_s) = (a.to_str().unwrap(), b.to_str().unwrap());
    assert_eq!(code(&strat_rk(&converge_args(a_s, "1"))), 0);
    assert_eq!(code(&strat_rk(&converge_args(b_s, "4"))), 0);
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("method,s,h,level,mse,mae,stderr,n_ok,n_failed\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 5);
}

#[test]
fn json_report_echoes_config() {
    let out = strat_rk(&[
        "converge-weak", "--method", "gauss2", "--paths", "500", "--levels", "2-3", "--seed", "3", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["master_seed"], 3);
    assert_eq!(v["n_paths"], 500);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["methods"][0]["fitted_order"].is_object());
}

fn assert_rejected(args: &[&str], out_file: &Path) {
    let out = strat_rk(args);
    assert_eq!(code(&out), 1, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_file.exists(), "{args:?} left {out_file:?} behind");
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_input_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("out.csv");
    let o = f.to_str().unwrap();
    assert_rejected(&["converge", "--method", "nope", "--out", o], &f);
    assert_rejected(&["converge", "--method", "gauss1", "--paths", "0", "--out", o], &f);
    assert_rejected(&["converge", "--method", "gauss1", "--levels", "4-12", "--out", o], &f);
    assert_rejected(&["converge", "--method", "gauss1", "--levels", "x", "--out", o], &f);
    assert_rejected(&["converge", "--method", "gauss1", "--a", "2", "--out", o], &f);
    assert_rejected(&["converge", "--problem", "vdp", "--method", "gauss1", "--out", o], &f);
    assert_rejected(&["converge", "--method", "gauss1", "--format", "xml", "--out", o], &f);
    assert_rejected(&["converge-weak", "--method", "gauss1", "--weak-order", "3", "--out", o], &f);
    assert_rejected(&["invariants", "--problem", "sinh", "--method", "gauss1", "--h", "0.5", "--horizon", "2", "--out", o], &f);
    assert_rejected(&["invariants", "--problem", "kubo", "--method", "gauss1", "--h", "0.3", "--horizon", "1", "--out", o], &f);
    assert_rejected(&["trajectory", "--method", "gauss1,gauss2", "--out", o], &f);
    assert_rejected(&["trajectory", "--method", "gauss1", "--level", "6", "--finest-level", "4", "--out", o], &f);
    assert_rejected(&["order", "--method", "gauss1", "--max-check", "13"], &f);
    assert_rejected(&["order", "--method", "gauss1", "--tableau-file", "/nonexistent.json"], &f);
}

#[test]
fn failed_trajectory_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("traj.csv");
    let out = strat_rk(&[
        "trajectory", "--problem", "sinh", "--sigma", "50", "--method", "gauss3", "--level", "2", "--out",
        f.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(!f.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 0"));
}

#[test]
fn trajectory_and_invariants_output() {
    let out = strat_rk(&["trajectory", "--problem", "kubo", "--method", "gauss2", "--level", "4", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("t,y1,y2\n"));
    assert_eq!(text.lines().count(), 1 + 17);

    let out = strat_rk(&[
        "invariants", "--problem", "kubo", "--method", "gauss2,erk4_classic", "--h", "0.5", "--horizon", "50",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("method,t,I,status\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 101);
}
