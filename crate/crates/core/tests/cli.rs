//! End-to-end runs of the `spp` binary.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn spp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spp"))
        .current_dir(dir)
        .env_remove("SPP_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn synth_graph(dir: &Path) {
    ok(&spp(
        dir,
        &["synth", "--dims", "24,24", "--tau", "1", "--theta", "0.85", "--gamma", "0.01", "--seed", "3", "--out", "g.tsv", "--truth", "truth.json"],
    ));
}

#[test]
fn fit_predict_eval_pipeline() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth_graph(dir);
    ok(&spp(
        dir,
        &["fit", "--data", "g.tsv", "--iters", "30", "--seed", "1", "--holdout-pairs", "pairs.tsv", "--holdout-labels", "labels.tsv", "--render", "fit.pgm"],
    ));
    for f in ["trace.csv", "samples.json", "pairs.tsv", "labels.tsv", "fit.pgm"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let trace = String::from_utf8(read(dir, "trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 31);
    assert!(read(dir, "fit.pgm").starts_with(b"P5\n"));

    ok(&spp(dir, &["predict", "--samples", "samples.json", "--pairs", "pairs.tsv", "--out", "preds.csv"]));
    let preds = String::from_utf8(read(dir, "preds.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("row,col,score"));
    let pairs = String::from_utf8(read(dir, "pairs.tsv")).unwrap();
    assert_eq!(preds.lines().count(), pairs.lines().count() + 1);

    ok(&spp(dir, &["eval", "--preds", "preds.csv", "--labels", "labels.tsv", "--report", "eval.json"]));
    let report: serde_json::Value = serde_json::from_slice(&read(dir, "eval.json")).unwrap();
    let auc = report["auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth_graph(dir);
    std::fs::write(dir.join("spp.toml"), "[fit]\niters = 7\nseed = 2\ntrace = \"from_file.csv\"\n").unwrap();
    ok(&spp(dir, &["--config", "spp.toml", "fit", "--data", "g.tsv", "--iters", "4"]));
    let trace = String::from_utf8(read(dir, "from_file.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);

    std::fs::write(dir.join("bad.toml"), "[fit]\nitrs = 7\n").unwrap();
    let out = spp(dir, &["--config", "bad.toml", "fit", "--data", "g.tsv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let env_run = |seed: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_spp"))
            .current_dir(dir)
            .env("SPP_SEED", seed)
            .args(["sample", "--dims", "10,10", "--tau", "20"])
            .output()
            .unwrap();
        ok(&out);
        out.stdout
    };
    let flag = spp(dir, &["sample", "--dims", "10,10", "--tau", "20", "--seed", "11"]);
    ok(&flag);
    assert_eq!(env_run("11"), flag.stdout);
    assert_ne!(env_run("12"), flag.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_spp"))
        .current_dir(dir)
        .env("SPP_SEED", "nope")
        .args(["sample", "--dims", "10,10", "--tau", "20"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn version_mismatch_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth_graph(dir);
    let truth = String::from_utf8(read(dir, "truth.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&truth).unwrap();
    v["version"] = serde_json::json!(99);
    std::fs::write(dir.join("future.json"), v.to_string()).unwrap();
    let out = spp(dir, &["fit", "--data", "g.tsv", "--iters", "2", "--resume", "future.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn resume_from_prior_draw_without_permutations() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    synth_graph(dir);
    // node count after ingest may be below 24 when isolated nodes drop out
    let nodes = String::from_utf8(read(dir, "g.tsv"))
        .unwrap()
        .lines()
        .flat_map(|l| l.split('\t').map(str::to_owned).collect::<Vec<_>>())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let dims = format!("{nodes},{nodes}");
    ok(&spp(dir, &["sample", "--dims", &dims, "--tau", "0.5", "--seed", "4", "--out", "start.json"]));
    let start: serde_json::Value = serde_json::from_slice(&read(dir, "start.json")).unwrap();
    assert!(start.get("row_perm").is_none());
    ok(&spp(
        dir,
        &["fit", "--data", "g.tsv", "--iters", "5", "--tau", "0.5", "--resume", "start.json", "--checkpoint-every", "5", "--checkpoint", "ck.json"],
    ));
    let ck: serde_json::Value = serde_json::from_slice(&read(dir, "ck.json")).unwrap();
    assert_eq!(ck["row_perm"].as_array().unwrap().len(), nodes);
    ok(&spp(dir, &["fit", "--data", "g.tsv", "--iters", "3", "--tau", "0.5", "--resume", "ck.json"]));
}

#[test]
fn check_reports_pass_lines() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let out = spp(dir, &["check", "--suite", "consistency", "--exact-only", "--report", "report.json"]);
    ok(&out);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().any(|l| l.starts_with("PASS")), "{err}");
    let report: serde_json::Value = serde_json::from_slice(&read(dir, "report.json")).unwrap();
    assert!(report.is_object() || report.is_array());
}

#[test]
fn bad_arguments_fail_cleanly() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    assert_eq!(spp(dir, &["sample", "--dims", "0,3"]).status.code(), Some(2));
    assert_eq!(spp(dir, &["fit", "--data", "missing.tsv"]).status.code(), Some(2));
    assert!(!spp(dir, &["nonsense"]).status.success());
}
