use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rwre_lab::{sha256_hex, RunManifest, RunStatus, MANIFEST_FILE};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/configs").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwre-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RWRE_LAB_THREADS")
        .output()
        .unwrap()
}

fn lab_with(args: &[&str], out: &Path, config_path: &Path) -> Output {
    let mut all = args.to_vec();
    all.push("--config");
    all.push(config_path.to_str().unwrap());
    lab(&all, out)
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::load(&dir.join(MANIFEST_FILE)).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn env_check_reports_kappa() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab_with(&["env-check"], tmp.path(), &config("kappa_log2_3.json"));
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    let kappa = report["kappa"].as_f64().unwrap();
    assert!((kappa - 3f64.log2()).abs() < 1e-9, "{kappa}");
    assert_eq!(report["regime"], "ballistic");
}

#[test]
fn env_check_rejects_recurrent_drift() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab_with(&["env-check"], tmp.path(), &config("deterministic_left.json"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(1.1) fails"), "{}", stderr(&o));
    assert_eq!(manifest(tmp.path()).status, RunStatus::Failed);
}

#[test]
fn malformed_json_names_position() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, "{\"model\": {\"kind\": }").unwrap();
    let o = lab_with(&["env-check"], &tmp.path().join("out"), &path);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1 column"), "{}", stderr(&o));
}

#[test]
fn invalid_model_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(&path, r#"{"model": {"kind": "two-point", "atoms": [[0.3, 0.5], [1.2, 0.5]]}}"#).unwrap();
    let o = lab_with(&["env-check"], &tmp.path().join("out"), &path);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("atoms[1]"), "{}", stderr(&o));
}

#[test]
fn estimate_matches_golden_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab_with(&["estimate"], tmp.path(), &config("estimate_small.json"));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("estimate.csv")).unwrap();
    assert_eq!(csv, golden("estimate_small.csv"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(!csv.contains('\r'));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("summary.json")).unwrap()).unwrap();
    for key in ["slope", "stderr", "theory", "gap"] {
        assert!(summary[key].is_number(), "{key}: {summary}");
    }
}

#[test]
fn zero_replicas_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab_with(&["estimate", "--replicas", "0"], tmp.path(), &config("estimate_small.json"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.replicas"));
}

#[test]
fn reruns_and_thread_counts_give_identical_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(lab_with(&["estimate", "--threads", "1"], &a, &config("estimate_small.json")).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_rwre-lab"))
        .args(["estimate", "--config", config("estimate_small.json").to_str().unwrap(), "--out"])
        .arg(&b)
        .env("RWRE_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.threads, 1);
    assert_eq!(mb.threads, 3);
    assert_eq!(ma.outputs, mb.outputs);
}

#[test]
fn manifest_covers_every_output_once() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(lab_with(&["estimate"], tmp.path(), &config("estimate_small.json")).status.success());
    let m = manifest(tmp.path());
    let listed: BTreeSet<String> = m.outputs.iter().map(|o| o.file.clone()).collect();
    assert_eq!(listed.len(), m.outputs.len());
    let on_disk: BTreeSet<String> = std::fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|f| f != MANIFEST_FILE)
        .collect();
    assert_eq!(listed, on_disk);
    for o in &m.outputs {
        let bytes = std::fs::read(tmp.path().join(&o.file)).unwrap();
        assert_eq!(o.sha256, sha256_hex(&bytes));
    }
    assert_eq!(m.config.run.seed, 11);
}

#[test]
fn manifest_replays_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(lab_with(&["estimate"], &a, &config("estimate_small.json")).status.success());
    let o = lab_with(&["estimate"], &b, &a.join(MANIFEST_FILE));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(manifest(&a).outputs, manifest(&b).outputs);
}

#[test]
fn budget_exhaustion_leaves_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("budget.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config("estimate_small.json")).unwrap()).unwrap();
    cfg["run"]["budget"] = serde_json::json!(1000);
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = tmp.path().join("out");
    let o = lab_with(&["estimate"], &out, &path);
    assert_eq!(o.status.code(), Some(4));
    let m = manifest(&out);
    assert_eq!(m.status, RunStatus::Partial);
    let csv = std::fs::read_to_string(out.join("estimate.csv")).unwrap();
    let g = golden("estimate_small.csv");
    assert_eq!(csv.lines().collect::<Vec<_>>(), g.lines().take(3).collect::<Vec<_>>());
}

#[test]
fn oracle_sweep_passes_by_default() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["oracle-check"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "pass");
    assert_eq!(report["instances"], 100);
}

#[test]
fn oracle_sweep_serializes_broken_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab_with(&["oracle-check"], tmp.path(), &config("broken_chain.json"));
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "fail");
    let ce = &report["counterexamples"][0];
    assert_eq!(ce["quantity"], "row-sum");
    assert_eq!(ce["chain"]["kernel"][1][2], 0.4);
}

#[test]
fn empty_oracle_sweep_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("empty.json");
    std::fs::write(&path, r#"{"run": {"instances": 0}}"#).unwrap();
    let out = tmp.path().join("out");
    let o = lab_with(&["oracle-check"], &out, &path);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "empty");
}

#[test]
fn exponent_curve_matches_golden_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab_with(&["exponent-curve"], tmp.path(), &config("curve.json"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(tmp.path().join("curve.csv")).unwrap(), golden("curve.csv"));
}

#[test]
fn simulate_writes_trajectories_and_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sim.json");
    std::fs::write(
        &path,
        r#"{"model": {"kind": "two-point", "atoms": [[0.3333333333333333, 0.5], [0.8, 0.5]]},
            "run": {"steps": 50, "replicas": 3, "keep_path": true, "targets": [2, -2]}}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = lab_with(&["simulate"], &out, &path);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = std::fs::read_to_string(out.join("trajectories.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 3);
    let paths = std::fs::read_to_string(out.join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 1 + 3 * 51);
    for line in lines.lines() {
        let t: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(t["steps"], 50);
    }
}

#[test]
fn simulate_outside_window_is_budget_exceeded() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sim.json");
    std::fs::write(
        &path,
        r#"{"model": {"kind": "two-point", "atoms": [[0.3333333333333333, 0.5], [0.8, 0.5]]},
            "run": {"steps": 10000, "window": [-3, 3]}}"#,
    )
    .unwrap();
    let o = lab_with(&["simulate"], &tmp.path().join("out"), &path);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn valleys_writes_decomposition_and_events() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("v.json");
    std::fs::write(
        &path,
        r#"{"model": {"kind": "two-point", "atoms": [[0.3333333333333333, 0.5], [0.8, 0.5]]},
            "run": {"seed": 2, "n": 16, "window": [-16, 2000]},
            "event": {"kind": "slowdown-hit", "nu": 0.5}}"#,
    )
    .unwrap();
    let out = tmp.path().join("out");
    let o = lab_with(&["valleys"], &out, &path);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("valleys.csv")).unwrap();
    assert!(csv.starts_with("i,K_i,b_i,H_i,certified\n0,-16,"), "{csv}");
    let events: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("events.json")).unwrap()).unwrap();
    assert_eq!(events["n"], 16.0);
    let env = std::fs::read_to_string(out.join("environment.jsonl")).unwrap();
    assert!(rwre_core::env::Environment::from_jsonl(&env).is_ok());
}
