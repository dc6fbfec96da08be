use std::path::Path;
use std::process::{Command, Output};

use fspde_core::covariance::stationary_variance_mode;
use serde_json::Value;

fn fspde(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fspde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SINGLE_MODE: &str =
    r#"{"type":"custom","alpha":1.0,"hurst":0.5,"eigenvalues":[2.0],"loadings":[1.5],"noise":"diagonal"}"#;

#[test]
fn theory_trace_matches_the_mode_variance() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(r#"{{"model":{SINGLE_MODE},"table_sizes":[8,16]}}"#);
    let out = fspde(&["theory", "--config", &config], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("theory.json"));
    let trace = report["trace_q_alpha"]["value"].as_f64().unwrap();
    assert_eq!(trace, stationary_variance_mode(2.0, 1.5, 0.5));
    // at H = 1/2 the variance of an OU mode is φ²/(2a)
    assert!((trace - 1.5f64.powi(2) / 4.0).abs() < 1e-14);
    assert_eq!(report["s_n"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("theory.csv")).unwrap();
    assert!(csv.starts_with("quantity,argument,value,tail\n"));
    let manifest = json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn estimate_of_a_constant_path_at_the_stationary_trace_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let trace = stationary_variance_mode(2.0, 1.5, 0.5);
    let mut csv = String::from("t,sq_norm\n");
    for i in 0..10 {
        csv.push_str(&format!("{},{}\n", i as f64 * 0.5, trace));
    }
    let input = dir.path().join("path.csv");
    std::fs::write(&input, csv).unwrap();
    let config = format!(r#"{{"model":{SINGLE_MODE}}}"#);
    let out = fspde(
        &[
            "estimate",
            "--config",
            &config,
            "--input",
            input.to_str().unwrap(),
            "--format",
            "csv",
        ],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("out/estimate.json"));
    for e in report["estimates"].as_array().unwrap() {
        assert!((e["alpha_hat"].as_f64().unwrap() - 1.0).abs() < 1e-14);
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("estimator,alpha_hat"));
}

#[test]
fn simulate_output_feeds_estimate_directly() {
    let dir = tempfile::tempdir().unwrap();
    let model = r#"{"type":"distributed","modes":4,"alpha":1.0,"hurst":0.6}"#;
    let sim =
        format!(r#"{{"model":{model},"n_steps":50,"dt":0.5,"projection":{{"type":"indicator","a":0.0,"b":0.5}}}}"#);
    let out = fspde(&["simulate", "--config", &sim, "--seed", "11"], &dir.path().join("sim"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cache = std::fs::read(dir.path().join("sim/trajectory.bin")).unwrap();
    let from_cache = fspde_core::io::read_trajectory_cache(&cache[..]).unwrap();
    let from_csv = fspde_core::io::read_trajectory_csv_file(&dir.path().join("sim/trajectory.csv")).unwrap();
    assert_eq!(from_cache, from_csv);
    assert_eq!(json(&dir.path().join("sim/manifest.json"))["seed"], 11);

    let est = format!(r#"{{"model":{model},"projection":{{"type":"indicator","a":0.0,"b":0.5}},"true_alpha":1.0}}"#);
    let input = dir.path().join("sim/trajectory.csv");
    let out = fspde(
        &["estimate", "--config", &est, "--input", input.to_str().unwrap()],
        &dir.path().join("est"),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let estimates = report["estimates"].as_array().unwrap();
    assert_eq!(estimates.len(), 4);
    assert!(estimates.iter().all(|e| e["standardized_error"].is_f64()));
    assert_eq!(report["dt"], 0.5);
}

#[test]
fn tiny_experiment_emits_schema_valid_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"kind":"moment_clt","model":{"type":"distributed","modes":2,"alpha":1.0,"hurst":0.6},"grid":[8,16],"replications":1}"#;
    let out = fspde(&["experiment", "moment_clt", "--config", config], dir.path());
    // a single replication cannot pass the distributional checks
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["kind"], "moment_clt");
    assert!(report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["replications"] == 1 && r["seed"] == 0));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("grid_point,statistic,estimator,value,se,replications,seed\n"));
    assert_eq!(csv.lines().count(), report["rows"].as_array().unwrap().len() + 1);
}

#[test]
fn failed_thresholds_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"kind":"consistency","model":{"type":"distributed","modes":2,"alpha":1.0,"hurst":0.6},"grid":[8,16],"replications":4,"thresholds":{"consistency_median":1e-9}}"#;
    let out = fspde(&["experiment", "consistency", "--config", config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed"));
}

#[test]
fn degenerate_projection_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    std::fs::write(&input, "t,sq_norm,projection\n0,1,0\n1,1,0\n").unwrap();
    let config = r#"{"model":{"type":"pointwise","y":0.5,"modes":8,"alpha":1.0,"hurst":0.7},"projection":{"type":"sine","mode":4},"estimators":["discrete_proj"]}"#;
    let out = fspde(
        &["estimate", "--config", config, "--input", input.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[degenerate]:"));
}

#[test]
fn configs_are_strict_and_errors_are_categorized() {
    let dir = tempfile::tempdir().unwrap();
    let typo = r#"{"model":{"type":"distributed","modes":2,"alpha":1.0,"hurst":0.6},"tabel_sizes":[4]}"#;
    let out = fspde(&["theory", "--config", typo], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]:"));

    let bad_hurst = r#"{"model":{"type":"distributed","modes":2,"alpha":1.0,"hurst":1.2}}"#;
    let out = fspde(&["theory", "--config", bad_hurst], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error["));

    let out = fspde(&["theory"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[usage]:"));

    let out = fspde(&["experiment", "bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_paths_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("theory.json");
    std::fs::write(&path, format!(r#"{{"model":{SINGLE_MODE},"table_sizes":[4]}}"#)).unwrap();
    let out = fspde(
        &["theory", "--config", path.to_str().unwrap(), "--format", "csv"],
        &dir.path().join("o"),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("\ns_n,4,"));
}
