use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn hitlace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitlace")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn decompose_reproduces_star_values() {
    let out = hitlace(&["decompose", &data("six_state_star.json"), "--target", "hub"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["schema"], "hitlace-report/1");
    assert_eq!(r["command"], "decompose");
    let p = &r["payload"];
    let lambdas: Vec<f64> = serde_json::from_value(p["lambdas"].clone()).unwrap();
    for (a, b) in lambdas.iter().zip([1.0, 0.8023, 0.7303, 0.1896]) {
        assert!((a - b).abs() < 5e-4);
    }
    let pi_star: Vec<f64> = serde_json::from_value(p["pi_star"].clone()).unwrap();
    for (a, b) in pi_star.iter().zip([6.0, 8.0, 3.0, 4.0]) {
        assert!((a - b / 21.0).abs() < 1e-9);
    }
    assert_eq!(p["lambda_is_stochastic"], true);
    assert!(r["verdicts"].as_array().unwrap().iter().all(|v| v["pass"] == true));
}

#[test]
fn decompose_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("star.json");
    let out = hitlace(&["decompose", &data("six_state_star.json"), "--horizon", "50", "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(r["config"]["horizon"], 50);
    let csv = std::fs::read_to_string(dir.path().join("star.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,cdf_primary,cdf_dual,cdf_convolution"));
    assert_eq!(lines.count(), 51);
}

#[test]
fn brown_v_rejects_two_cycle() {
    let out = hitlace(&["brown-v", &data("cycle2.json")]);
    assert_eq!(out.status.code(), Some(3));
    let r = report(&out);
    assert!(r["error"].as_str().unwrap().contains("t = 1"));
}

#[test]
fn brown_v_reports_failed_link_condition() {
    let out = hitlace(&["brown-v", &data("counterexample.json"), "--horizon", "100"]);
    assert_eq!(out.status.code(), Some(0));
    let p = &report(&out)["payload"];
    assert_eq!(p["monotone"], true);
    assert_eq!(p["lambda_is_stochastic"], false);
    assert_eq!(p["link_condition"]["holds"], false);
    assert_eq!(p["link_condition"]["witness"]["state"], 2);
}

#[test]
fn moran_four() {
    let out = hitlace(&["moran", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let p = &report(&out)["payload"];
    assert_eq!(p["mean"], 9.0);
    assert_eq!(p["variance"], 32.0);
    assert_eq!(p["mean_exact"], "9");
}

#[test]
fn moran_out_of_range_is_pipeline_error() {
    assert_eq!(hitlace(&["moran", "1"]).status.code(), Some(3));
}

#[test]
fn block_command_certifies() {
    let out = hitlace(&["block", &data("block_star.json"), "--blocks", &data("block_star_blocks.json")]);
    assert_eq!(out.status.code(), Some(0));
    let p = &report(&out)["payload"];
    assert_eq!(p["dual"]["p_hat"].as_array().unwrap().len(), 4);
}

#[test]
fn verdict_failure_exits_one() {
    let out = hitlace(&["decompose", &data("six_state_star.json"), "--tol-spectral", "1e-300", "--tol-algebraic", "1e-300"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(report(&out)["verdicts"].as_array().unwrap().iter().any(|v| v["pass"] == false));
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"P\": [[0.5, 0.5]").unwrap();
    assert_eq!(hitlace(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hitlace(&["validate", "/nonexistent/chain.json"]).status.code(), Some(2));
    assert_eq!(hitlace(&["decompose", &data("six_state_star.json"), "--horizon", "0"]).status.code(), Some(2));
    assert_eq!(hitlace(&["decompose", &data("six_state_star.json"), "--tol-spectral", "-1"]).status.code(), Some(2));
}

#[test]
fn invalid_matrix_is_pipeline_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("rows.json");
    std::fs::write(&bad, r#"{"P": [[0.5, 0.6], [0.5, 0.5]]}"#).unwrap();
    let out = hitlace(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(report(&out)["error"].as_str().unwrap().contains("row 0"));
}

#[test]
fn validate_reports_structure() {
    let out = hitlace(&["validate", &data("cycle2.json")]);
    assert_eq!(out.status.code(), Some(0));
    let p = &report(&out)["payload"];
    assert_eq!(p["period"], 2);
    assert_eq!(p["reversible"], true);
}

#[test]
fn collapse_merges_into_target() {
    let out = hitlace(&["decompose", &data("six_state_star.json"), "--collapse", "hub,a", "--target", "hub"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["payload"]["target"], "hub");
    assert_eq!(r["config"]["collapse"][1], "a");
}

#[test]
fn link_sim_is_reproducible() {
    let args = ["link-sim", &data("block_star.json"), "--paths", "2000", "--seed", "7", "--horizon", "100"];
    let a = hitlace(&args);
    let b = hitlace(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let p = &report(&a)["payload"];
    assert_eq!(p["absorption_agreements"], 2000);
}

#[test]
fn link_sim_needs_stochastic_link() {
    // a reversible chain whose star link has a negative entry
    let out = hitlace(&["link-sim", &data("quasi_link.json"), "--paths", "10"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(report(&out)["error"].as_str().unwrap().contains("not stochastic"));
}
