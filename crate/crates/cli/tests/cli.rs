use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trunc-fpca"));
    c.env_remove("TRUNC_FPCA_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, case: &str, n: &str, seed: &str) {
    let o = run(&["simulate", "--case", case, "--n", n, "--seed", seed, "--out", s(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["frobnicate"])), 64);
    assert_eq!(code(&run(&["simulate", "--case", "1", "--bogus", "--out", "x"])), 64);
    assert_eq!(code(&run(&[])), 64);
    let o = bin()
        .env("TRUNC_FPCA_THREADS", "many")
        .args(["simulate", "--case", "1", "--out", "unused"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 64);
}

#[test]
fn simulate_writes_dataset_truth_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    simulate(&out, "5", "100", "1");
    let data = fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert!(data.starts_with("unit_id,time,value,flag"));
    let units: std::collections::BTreeSet<&str> = data.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(units.len(), 100);
    assert!(fs::read_to_string(out.join("truth.json"))
        .unwrap()
        .contains("\"structure\""));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    for key in [
        "\"command\": \"simulate\"",
        "\"seeds\"",
        "\"outputs\"",
        "dataset.csv",
        "truth.json",
        "sha256",
    ] {
        assert!(manifest.contains(key), "manifest lacks {key}");
    }
    assert!(!manifest.contains(s(tmp.path())), "manifest records the output path");
}

#[test]
fn missing_input_exits_66_without_outputs() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mean");
    let o = run(&[
        "fit-mean",
        "--data",
        "missing.csv",
        "--lower",
        "-1",
        "--upper",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 66);
    assert!(!out.exists());
    let o = run(&["fit-mean", "--data", "missing.csv", "--out", s(&out)]);
    assert_eq!(code(&o), 66);
    assert!(!out.exists());
}

#[test]
fn validation_failures_exit_1() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "unit_id,time,value,flag\na,0.1,0.2,none\na,0.5,1,none\n").unwrap();
    let o = run(&["validate", "--data", s(&bad), "--lower", "-1", "--upper", "1"]);
    assert_eq!(code(&o), 1);
    let report = String::from_utf8_lossy(&o.stdout);
    assert!(report.contains("FAIL") && report.contains("unit a"), "{report}");

    // Bounds are required.
    let o = run(&["fit-mean", "--data", s(&bad), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&o), 1);

    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"lower": -1, "upper": 1, "no_such_field": 3}"#).unwrap();
    let o = run(&["--config", s(&cfg), "validate", "--data", s(&bad)]);
    assert_eq!(code(&o), 1);
    fs::write(&cfg, r#"{"lower": 1, "upper": -1}"#).unwrap();
    assert_eq!(code(&run(&["--config", s(&cfg), "validate", "--data", s(&bad)])), 1);
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 20, "seed": 5}"#).unwrap();
    let out = tmp.path().join("sim");
    let o = run(&[
        "--config",
        s(&cfg),
        "simulate",
        "--case",
        "1",
        "--n",
        "30",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"n\": 30"), "{manifest}");
    assert!(manifest.contains("\"seed\": 5"), "{manifest}");
}

fn pipeline(dir: &Path) {
    simulate(&dir.join("sim"), "5", "40", "3");
    let data = dir.join("sim/dataset.csv");
    let o = run(&[
        "fit-cov",
        "--data",
        s(&data),
        "--lower",
        "-1",
        "--upper",
        "1",
        "--out",
        s(&dir.join("cov")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        "scores",
        "--data",
        s(&data),
        "--lower",
        "-1",
        "--upper",
        "1",
        "--mean",
        s(&dir.join("cov/mean_variance.json")),
        "--model",
        s(&dir.join("cov/covariance.json")),
        "--k",
        "2",
        "--seed",
        "9",
        "--out",
        s(&dir.join("scores")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in ["sim", "cov", "scores"] {
        let mut names: Vec<_> = fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        names.sort();
        for p in names {
            out.push((
                format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()),
                fs::read(&p).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn identical_seeds_give_identical_artifacts() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.iter().any(|(n, _)| n == "cov/sigma_tilde.csv"));
    assert!(fa.iter().any(|(n, _)| n == "scores/scores.csv"));
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
}

#[test]
fn gflm_recovers_a_planted_slope() {
    let tmp = TempDir::new().unwrap();
    pipeline(tmp.path());
    let scores = fs::read_to_string(tmp.path().join("scores/scores.csv")).unwrap();
    let mut outcomes = String::from("unit_id,y,age\n");
    for (i, line) in scores.lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols[1] == "1" {
            let xi: f64 = cols[2].parse().unwrap();
            let age = 30 + (i * 7) % 40;
            outcomes.push_str(&format!("{},{},{age}\n", cols[0], 1.0 + 2.0 * xi + 0.01 * age as f64));
        }
    }
    let path = tmp.path().join("outcomes.csv");
    fs::write(&path, outcomes).unwrap();
    let out = tmp.path().join("gflm");
    let o = run(&[
        "gflm",
        "--scores",
        s(&tmp.path().join("scores/scores.csv")),
        "--outcomes",
        s(&path),
        "--covariates",
        "age",
        "--link",
        "identity",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = fs::read_to_string(out.join("gflm_fit.json")).unwrap();
    assert!(fit.contains("\"age\""), "{fit}");
    let predictions = fs::read_to_string(out.join("predictions.csv")).unwrap();
    for line in predictions.lines().skip(1) {
        let cols: Vec<f64> = line.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
        assert!((cols[0] - cols[1]).abs() < 1e-8, "{line}");
    }

    // A response that is not binary cannot take the logit link.
    let o = run(&[
        "gflm",
        "--scores",
        s(&tmp.path().join("scores/scores.csv")),
        "--outcomes",
        s(&path),
        "--link",
        "logit",
        "--out",
        s(&tmp.path().join("logit")),
    ]);
    assert_eq!(code(&o), 1);
}

/// Glucose-monitor style data: minutes since start, readings clamped to
/// the sensor range 40–400 with explicit flags.
#[test]
fn sensor_range_fixture() {
    let tmp = TempDir::new().unwrap();
    let mut csv = String::from("unit_id,time,value,flag\n");
    for u in 0..12 {
        for j in 0..24 {
            let minutes = 60 * j + 5 * (u % 3);
            let raw =
                180.0 + 200.0 * ((j as f64) / 4.0 + u as f64).sin() + 15.0 * ((u * 31 + j * 17) % 7) as f64 - 45.0;
            let (value, flag) = if raw >= 400.0 {
                (400.0, "above")
            } else if raw <= 40.0 {
                (40.0, "below")
            } else {
                (raw, "none")
            };
            csv.push_str(&format!("p{u:02},{minutes},{value},{flag}\n"));
        }
    }
    assert!(csv.contains(",400,above"));
    let data = tmp.path().join("cgm.csv");
    fs::write(&data, &csv).unwrap();
    let common = ["--data", s(&data), "--lower", "40", "--upper", "400", "--rescale-time"];
    let o = run(&[&["validate"][..], &common].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = tmp.path().join("mean");
    let o = run(&[&["fit-mean"][..], &common, &["--grid-size", "12", "--out", s(&out)]].concat());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mean = fs::read_to_string(out.join("mean.csv")).unwrap();
    assert_eq!(mean.lines().count(), 13);
    for line in mean.lines().skip(1) {
        let mu: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((0.0..600.0).contains(&mu), "{line}");
    }

    // Without rescaling the minute stamps fall outside [0, 1].
    let o = run(&["validate", "--data", s(&data), "--lower", "40", "--upper", "400"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn reproduce_fast_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("t1");
    let o = run(&[
        "reproduce",
        "--table",
        "1",
        "--fast",
        "--replicates",
        "2",
        "--n",
        "40",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "table1.csv",
        "table1_comparison.csv",
        "summary.csv",
        "replicates.csv",
        "figure_phi1.csv",
        "figure_mean.csv",
        "figure_sigma_truth.csv",
        "figure_sigma_proposed.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let table = fs::read_to_string(out.join("table1.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 15);
    let cmp = fs::read_to_string(out.join("table1_comparison.csv")).unwrap();
    assert!(cmp.starts_with("case,metric,method,reference,run,"));
    assert_eq!(cmp.lines().count(), 1 + 5 * 2 * 3);

    let out = tmp.path().join("g");
    let o = run(&[
        "reproduce",
        "--table",
        "gflm",
        "--replicates",
        "2",
        "--n",
        "40",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = fs::read_to_string(out.join("gflm.csv")).unwrap();
    assert!(g.contains("gflm_identity,proposed,mse_heldout"));
    assert!(g.contains("gflm_logit,proposed,accuracy_heldout"));
}
