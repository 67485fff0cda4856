use std::path::Path;
use std::process::{Command, Output};

fn riskbench(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_riskbench")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "riskbench {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_aggregate_figure() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    riskbench(&[
        "simulate", "--ids", "217,289,361,397", "--replications", "2", "--superpop", "5000", "--workers", "2", "--out",
        s(&run),
    ]);
    let results = std::fs::read_to_string(run.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 4 * 2 * 7);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["replications"], 2);
    assert_eq!(manifest["metric_population"], "superpop");

    let summary = dir.path().join("summary.csv");
    riskbench(&["aggregate", "--in", s(&run), "--out", s(&summary)]);
    assert!(dir.path().join("summary_selection.csv").exists());

    let figs = dir.path().join("figs");
    let out = riskbench(&["figure", "--id", "1", "--in", s(&summary), "--out", s(&figs)]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 8);
    assert!(figs.join("fig1_panelA.csv").exists());

    let missing = Command::new(env!("CARGO_BIN_EXE_riskbench"))
        .args(["figure", "--id", "2", "--in", s(&summary), "--out", s(&figs)])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}

#[test]
fn apply_prints_aic_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("trial.csv");
    let mut text = String::from("death,tx,age,sex\n");
    // Deterministic toy data with some signal in age.
    for i in 0..600u32 {
        let age = 40 + (i * 37) % 45;
        let sex = if (i * 7) % 3 == 0 { "f" } else { "m" };
        let tx = i % 2;
        let y = u32::from((i * 13 + age) % 100 < age - 30);
        text.push_str(&format!("{y},{tx},{age},{sex}\n"));
    }
    std::fs::write(&data, text).unwrap();
    let out_dir = dir.path().join("report");
    let out = riskbench(&[
        "apply", "--data", s(&data), "--outcome", "death", "--treatment", "tx", "--covariates", "age,sex", "--out",
        s(&out_dir),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("method\tlog_likelihood\taic"));
    assert!(stdout.contains("selected: "));
    assert!(stdout.contains("5-fold cross-validated"));
    let benefit = std::fs::read_to_string(out_dir.join("benefit.csv")).unwrap();
    assert_eq!(benefit.lines().count(), 601);
    assert!(out_dir.join("aic.csv").exists());
    assert!(out_dir.join("cross_validation.csv").exists());
}

#[test]
fn bad_arguments_fail() {
    let out = Command::new(env!("CARGO_BIN_EXE_riskbench"))
        .args(["simulate", "--ids", "5-2", "--out", "/nonexistent/x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
