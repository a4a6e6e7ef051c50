use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn rate_lab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rate-lab"));
    cmd.args(args).env_remove("RATE_LAB_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn rate-lab")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_sweep_config(dir: &Path, tolerance: f64) -> String {
    let cfg = serde_json::json!({
        "model": {"b": 2.0, "N_trunc": 64, "noise": {"kind": "gaussian", "sigma": 0.5}},
        "m_grid": [16, 32, 64, 128],
        "replicates": 8,
        "seed": 5,
        "tolerance": tolerance,
        "output": {"dir": dir.join("unused").display().to_string()}
    });
    let path = dir.join("sweep.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path.display().to_string()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn exponents_for_b2_r_half() {
    let out = rate_lab(&["exponents", "--b", "2", "--r", "0.5"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = stdout_json(&out);
    let get = |k: &str| v[k].as_f64().unwrap_or_else(|| panic!("missing {k}: {v}"));
    assert!((get("rkhs_upper") - 0.2).abs() < 1e-12);
    assert!((get("l2_upper_theta") - 1.0 / 3.0).abs() < 1e-12);
    assert!((get("l2_upper_psi") - 0.4).abs() < 1e-12);
}

#[test]
fn tikhonov_filter_check_passes() {
    let out = rate_lab(&["filters", "--check", "tikhonov"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out).as_array().unwrap().len(), 1);
}

#[test]
fn missing_config_is_an_error() {
    let out = rate_lab(&["sweep", "--config", "definitely-missing.json"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("definitely-missing.json"), "{msg}");
    assert!(msg.to_lowercase().contains("no such file"), "{msg}");
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.json");
    fs::write(&path, r#"{"model": {"b": 2.0}, "replicates": "many"}"#).unwrap();
    let out = rate_lab(&["sweep", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`replicates`"), "{}", stderr(&out));

    fs::write(&path, r#"{"model": {"b": 2.0, "bogus": 1}}"#).unwrap();
    let out = rate_lab(&["sweep", "--config", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bogus"), "{}", stderr(&out));
}

#[test]
fn bad_flag_exits_one() {
    assert_eq!(rate_lab(&["exponents", "--b", "x", "--r", "0.5"], &[]).status.code(), Some(1));
    assert_eq!(rate_lab(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn sweep_outputs_are_deterministic_and_seeded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_sweep_config(tmp.path(), 0.1);
    let run = |out: &Path, threads: &str, seed: Option<&str>| {
        let envs: Vec<(&str, &str)> = seed.map(|s| ("RATE_LAB_SEED", s)).into_iter().collect();
        let o = rate_lab(
            &["--threads", threads, "sweep", "--config", &cfg, "--out", out.to_str().unwrap()],
            &envs,
        );
        assert!(matches!(o.status.code(), Some(0) | Some(2)), "{}", stderr(&o));
        o
    };

    let a = tmp.path().join("a/deep/dir");
    let b = tmp.path().join("b");
    run(&a, "1", None);
    run(&b, "2", None);
    for name in ["sweep.csv", "curve.csv"] {
        assert!(read(&a, name) == read(&b, name), "{name} differs across thread counts");
    }
    // The report echoes its own output directory; everything else must match.
    let report_without_dir = |d: &Path| {
        let mut v: Value = serde_json::from_slice(&read(d, "report.json")).unwrap();
        v["config"]["output"] = Value::Null;
        v.to_string()
    };
    assert_eq!(report_without_dir(&a), report_without_dir(&b));

    let csv = String::from_utf8(read(&a, "sweep.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "m,lambda,norm,q50,q90,margin,condition_holds"
    );
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    let curve = String::from_utf8(read(&a, "curve.csv")).unwrap();
    assert_eq!(curve.lines().next().unwrap(), "m,norm,lambda,predicted,observed_median");

    let c = tmp.path().join("c");
    run(&c, "1", Some("99"));
    let report: Value = serde_json::from_slice(&read(&c, "report.json")).unwrap();
    assert_eq!(report["config"]["seed"], 99);
    assert!(read(&a, "sweep.csv") != read(&c, "sweep.csv"));
}

#[test]
fn failed_verdict_exits_two() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_sweep_config(tmp.path(), 1e-9);
    let out_dir = tmp.path().join("out");
    let out = rate_lab(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn invalid_seed_override_is_rejected() {
    let out = rate_lab(
        &["concentration", "--n-trunc", "32", "--replicates", "8", "--m", "32"],
        &[("RATE_LAB_SEED", "minus one")],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("RATE_LAB_SEED"));
}

#[test]
fn concentration_writes_replicate_csv() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("conc");
    let out = rate_lab(
        &[
            "concentration", "--n-trunc", "64", "--m", "64", "--replicates", "100", "--out",
            dir.to_str().unwrap(),
        ],
        &[],
    );
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.join("concentration.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "replicate,statistic,bound,violated");
    assert_eq!(csv.lines().count(), 101);
    assert!(dir.join("report.json").exists());
}

#[test]
fn fit_and_effdim_write_outputs() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("fit");
    let out = rate_lab(&["fit", "--n-trunc", "64", "--m", "50", "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = stdout_json(&out);
    assert!(summary["lambda"].as_f64().unwrap() > 0.0);
    let spectrum = fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().next().unwrap(), "index,eigenvalue");
    assert!(dir.join("fit.json").exists());

    let dir = tmp.path().join("effdim");
    let out = rate_lab(&["effdim", "--n-trunc", "256", "--points", "16", "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(dir.join("effdim.csv")).unwrap().lines().count(), 17);
}

#[test]
fn lower_bound_report_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let args = |d: &Path| {
        vec![
            "lower-bound".to_string(),
            "--n-trunc".into(),
            "128".into(),
            "--trials".into(),
            "20".into(),
            "--out".into(),
            d.display().to_string(),
        ]
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (d, threads) in [(&a, "1"), (&b, "3")] {
        let mut argv = vec!["--threads".to_string(), threads.to_string()];
        argv.extend(args(d));
        let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
        let out = rate_lab(&argv, &[]);
        assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", stderr(&out));
    }
    assert!(read(&a, "lower_bound.json") == read(&b, "lower_bound.json"));
    let report: Value = serde_json::from_slice(&read(&a, "lower_bound.json")).unwrap();
    assert!(report["ell"].as_u64().unwrap() >= 24);
}
