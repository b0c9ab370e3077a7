use std::fs;

use hitlab::expt::{run, validate, ExperimentConfig};
use hitlab::Error;
use sha2::{Digest, Sha256};

const QUENCHED: &str = r#"
kind = "quenched_shift"
seeds = [1]
[fiber]
w = [[0.3, 0.7], [0.7, 0.3]]
[sweep]
n = [6, 10, 14]
"#;

#[test]
fn quenched_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(QUENCHED).unwrap();
    let summary = run(&cfg, dir.path()).unwrap();
    assert!(summary.truncated.is_none());

    let mut names: Vec<String> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        ["manifest.json", "quenched_n10_seed1.csv", "quenched_n14_seed1.csv", "quenched_n6_seed1.csv", "quenched_report.json"]
    );

    let csv = fs::read_to_string(dir.path().join("quenched_n6_seed1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,k,survival,exp_minus_t,abs_err");
    assert_eq!(lines.count(), 51);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"], cfg.hash());
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 4);
    for f in files {
        let bytes = fs::read(dir.path().join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"], bytes.len());
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
    }

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("quenched_report.json")).unwrap()).unwrap();
    assert_eq!(report["cases"].as_array().unwrap().len(), 3);
}

#[test]
fn budget_truncates_and_names_the_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml_str(QUENCHED).unwrap();
    cfg.budget = 200_000;
    let summary = run(&cfg, dir.path()).unwrap();
    let msg = summary.truncated.expect("run should be truncated");
    assert!(msg.contains("n = 14") && msg.contains("t = 5"), "{msg}");
    assert!(dir.path().join("quenched_n6_seed1.csv").exists());
    assert!(!dir.path().join("quenched_n14_seed1.csv").exists());
    let csv = fs::read_to_string(dir.path().join("quenched_n10_seed1.csv")).unwrap();
    assert!(csv.lines().last().unwrap().starts_with("# truncated"));
}

#[test]
fn ledger_budget_error_names_n_and_t() {
    let dir = tempfile::tempdir().unwrap();
    let text = "kind = \"ledger\"\nseeds = [1]\nbudget = 1000\n[fiber]\nw = [[0.3, 0.7], [0.7, 0.3]]\n[sweep]\nn = [6]\nt = [1.0]\n";
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    let summary = run(&cfg, dir.path()).unwrap();
    let msg = summary.truncated.unwrap();
    assert!(msg.contains("n = 6") && msg.contains("t = 1"), "{msg}");
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let text = "kind = \"quenched_shift\"\nseeds = [1]\n[fiber]\nw = [[0.3, 0.6], [0.7, 0.3]]\n[sweep]\nn = [6]\n";
    let cfg = ExperimentConfig::from_toml_str(text).unwrap();
    let v = validate(&cfg);
    assert!(v.iter().any(|m| m.contains("row 0 not stochastic")), "{v:?}");
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(run(&cfg, dir.path()), Err(Error::Config(_))));

    assert!(ExperimentConfig::from_toml_str("kind = \"quenched_shift\"\nseeds = [1]\nbogus = 3\n").is_err());
}
