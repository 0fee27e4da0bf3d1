use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn critgw(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_critgw"));
    cmd.args(args).env_remove("CRITGW_THREADS");
    if let Some(t) = threads {
        cmd.env("CRITGW_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn preset(name: &str) -> String {
    format!("{}/configs/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_every_experiment() {
    let o = critgw(&["list-experiments"], None);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "stationary-oracle",
        "stationary-tail",
        "progeny-tail",
        "tail-process",
        "anticluster",
        "sum-clt",
        "extremal",
        "fw-check",
        "randsum",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "unknown.json",
        r#"{"experiment": "fw-check", "expect": "finite", "colour": "red",
            "model": {"offspring": {"kind": "power-fractional", "alpha": 0.5},
                      "immigration": {"kind": "constant", "b": 1}}}"#,
    );
    let o = critgw(&["run", "--config", unknown.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let domain = write_config(
        dir.path(),
        "domain.json",
        r#"{"experiment": "progeny-tail",
            "model": {"offspring": {"kind": "slack", "alpha": 0.5, "c": 0.6667},
                      "immigration": {"kind": "constant", "b": 1}}}"#,
    );
    let o = critgw(&["run", "--config", domain.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));

    let o = critgw(&["genfun", "fw-check", "--alpha", "1.5"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fw_check_presets_classify_and_write_a_report() {
    let dir = tempfile::tempdir().unwrap();
    for (name, class) in [
        ("fw-check-b1", "finite"),
        ("fw-check-b2", "finite"),
        ("fw-check-infinite-a", "infinite"),
        ("fw-check-infinite-b", "infinite"),
    ] {
        let out = dir.path().join(name);
        let o = critgw(&["run", "--config", &preset(name), "--out", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
        let report: serde_json::Value =
            serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(report["status"], "pass");
        assert_eq!(report["config"]["expect"], class);
        assert!(out.join("integrand.csv").exists());
    }
}

#[test]
fn wrong_expectation_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "wrong.json",
        r#"{"experiment": "fw-check", "expect": "finite",
            "model": {"offspring": {"kind": "slack", "alpha": 0.5, "c": 0.5},
                      "immigration": {"kind": "sibuya", "beta": 0.3}}}"#,
    );
    let out = dir.path().join("out");
    let o = critgw(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("report.json").exists());
}

#[test]
fn too_little_data_exits_with_3_and_a_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "short.json",
        r#"{"experiment": "stationary-tail", "sizes": {"n": 2000, "burn_in": 100},
            "model": {"offspring": {"kind": "power-fractional", "alpha": 0.5},
                      "immigration": {"kind": "constant", "b": 1}}}"#,
    );
    let out = dir.path().join("out");
    let o = critgw(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "insufficient-data");
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "progeny.json",
            r#"{"experiment": "progeny-tail", "seed": 42,
                "model": {"offspring": {"kind": "slack", "alpha": 0.5, "c": 0.5},
                          "immigration": {"kind": "constant", "b": 1}},
                "sizes": {"reps": 20000, "cap": 1000000, "thresholds": [10, 30, 100, 300, 1000]}}"#,
        ),
        (
            "randsum.json",
            r#"{"experiment": "randsum", "seed": 7,
                "randsum": {"count": {"kind": "poisson", "mean": 2.0}, "nu": 0.5},
                "sizes": {"reps": 20000, "thresholds": [10, 100, 1000]}}"#,
        ),
    ];
    for (name, json) in configs {
        let cfg = write_config(dir.path(), name, json);
        let mut runs = Vec::new();
        for threads in ["1", "3", "1"] {
            let out = dir.path().join(format!("{name}-{threads}-{}", runs.len()));
            critgw(
                &["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
                Some(threads),
            );
            let report: serde_json::Value =
                serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
            runs.push((csv_files(&out), report["rows"].clone()));
        }
        assert!(!runs[0].0.is_empty());
        assert_eq!(runs[0], runs[1], "{name}: thread count changed the output");
        assert_eq!(runs[0], runs[2], "{name}: rerun changed the output");
    }
}

#[test]
fn scale_multiplies_monte_carlo_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "randsum.json",
        r#"{"experiment": "randsum", "seed": 1,
            "randsum": {"count": {"kind": "constant", "b": 3}, "nu": 0.5},
            "sizes": {"reps": 1000, "thresholds": [10, 100]}}"#,
    );
    let out = dir.path().join("out");
    critgw(
        &["run", "--config", cfg.to_str().unwrap(), "--scale", "2.5", "--out", out.to_str().unwrap()],
        None,
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["sizes"]["reps"], 2500);
    let o = critgw(&["run", "--config", cfg.to_str().unwrap(), "--scale", "0"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn genfun_records_have_input_value_and_error_bound() {
    let o = critgw(&["genfun", "eval-phi", "--alpha", "0.5", "--s", "0.19,0.75"], None);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    for (rec, exact) in lines.iter().zip([0.1, 0.5]) {
        let v = rec["value"].as_f64().unwrap();
        let bound = rec["error_bound"].as_f64().unwrap();
        assert!((v - exact).abs() <= bound.max(1e-12), "{rec}");
    }

    let o = critgw(&["genfun", "fn", "--alpha", "0.5", "--n", "3", "--s", "0"], None);
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    // 1 - 1/(1 + 3)^2
    assert!((rec["value"].as_f64().unwrap() - 0.9375).abs() < 1e-15);

    let o = critgw(&["genfun", "pmf", "--alpha", "0.5", "-K", "4"], None);
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let p: Vec<f64> = serde_json::from_value(rec["value"].clone()).unwrap();
    for (got, want) in p.iter().zip([0.0, 0.5, 0.125, 0.0625, 0.0390625]) {
        assert!((got - want).abs() < 1e-8);
    }

    let o = critgw(
        &["genfun", "fw-check", "--alpha", "0.5", "--immigration", "sibuya:0.3"],
        None,
    );
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(rec["value"]["classification"], "infinite");
}

#[test]
fn sim_output_feeds_the_estimators() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.csv");
    let o = critgw(
        &["sim", "chain", "--alpha", "0.5", "--n", "1000", "--burn-in", "10", "--seed", "3", "--out", chain.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let text = fs::read_to_string(&chain).unwrap();
    assert_eq!(text.lines().next(), Some("index,value"));
    assert_eq!(text.lines().count(), 1001);

    let survival = critgw(
        &["sim", "progeny", "--alpha", "0.5", "--c", "0.5", "--reps", "2000", "--thresholds", "10,100"],
        None,
    );
    assert_eq!(
        stdout(&survival).lines().next(),
        Some("threshold,empirical,predicted,ratio,n_effective")
    );

    let samples = dir.path().join("pareto.csv");
    let o = critgw(
        &["sim", "clan", "--alpha", "0.5", "--reps", "20000", "--seed", "1", "--raw", "--out", samples.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    for method in ["hill", "loglog"] {
        let o = critgw(&["est", method, "--input", samples.to_str().unwrap()], None);
        assert!(o.status.success(), "{method}");
        let rec: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
        for key in ["method", "index_hat", "constant_hat", "k_used", "diagnostics"] {
            assert!(rec.get(key).is_some(), "{method}: {key} missing");
        }
        // clan tail index 1/(1+alpha) = 2/3
        let idx = rec["index_hat"].as_f64().unwrap();
        assert!((idx - 2.0 / 3.0).abs() < 0.15, "{method}: {idx}");
    }
}
