//! End-to-end checks of the command-line contract: commands, file formats,
//! exit codes, and report determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn alcmv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alcmv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_temp(name: &str, content: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("alcmv-test-{}-{name}", std::process::id()));
    std::fs::write(&path, content).expect("temp file writable");
    path
}

fn stdout_json(output: &Output) -> serde_json::Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

#[test]
fn verify_random_sweep_passes() {
    let output = alcmv(&[
        "verify", "--all", "--random", "4", "42", "5", "--d", "1", "2",
    ]);
    assert!(output.status.success(), "{output:?}");
    let json = stdout_json(&output);
    let reports = json["reports"].as_array().unwrap();
    // 5 seeds x (1 + 3*4 variants) x 2 depths.
    assert_eq!(reports.len(), 5 * 13 * 2);
    assert!(reports.iter().all(|r| r["pass"].as_bool().unwrap()));
    assert_eq!(json["manifest"]["seed"], 42);
}

#[test]
fn verify_single_variant_from_file() {
    let path = write_temp(
        "p2.json",
        r#"{"case": "periodic", "alphas": [[0.5, 0.0], [0.3, 0.0]]}"#,
    );
    let output = alcmv(&[
        "verify",
        "--variant",
        "PeriodicK0",
        "--coeffs",
        path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let json = stdout_json(&output);
    assert_eq!(json["reports"].as_array().unwrap().len(), 1);
    assert_eq!(json["reports"][0]["variant"], "PeriodicK0");
}

#[test]
fn verify_fd_route_and_threads() {
    let output = alcmv(&[
        "verify",
        "--all",
        "--random",
        "4",
        "7",
        "4",
        "--method",
        "fd",
        "--threads",
        "4",
    ]);
    assert!(output.status.success(), "{output:?}");
    let json = stdout_json(&output);
    assert!(json["reports"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["method"] == "fd" && r["pass"].as_bool().unwrap()));
}

#[test]
fn verify_reports_are_deterministic() {
    let run = || {
        let output = alcmv(&["verify", "--all", "--random", "6", "11", "3"]);
        assert!(output.status.success());
        let mut json = stdout_json(&output);
        json["manifest"]
            .as_object_mut()
            .unwrap()
            .remove("unix_time");
        serde_json::to_string(&json).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn verify_exit_one_on_impossible_threshold() {
    let output = alcmv(&[
        "verify",
        "--all",
        "--random",
        "4",
        "3",
        "2",
        "--analytic-tol",
        "1e-30",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn malformed_file_exits_two() {
    let path = write_temp("broken.json", r#"{"case": "periodic""#);
    let output = alcmv(&["verify", "--all", "--coeffs", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let output = alcmv(&["invariants", "--coeffs", "/nonexistent/x.json"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn invalid_modulus_exits_two() {
    let path = write_temp(
        "badmod.json",
        r#"{"case": "periodic", "alphas": [[1.0, 0.0], [0.0, 0.0]]}"#,
    );
    let output = alcmv(&["verify", "--all", "--coeffs", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn flow_writes_csv_and_drift() {
    let coeffs = write_temp(
        "geronimus.json",
        r#"{"case": "periodic", "alphas": [[0.4, 0.0], [0.4, 0.0]]}"#,
    );
    let mut csv_path = std::env::temp_dir();
    csv_path.push(format!("alcmv-test-{}-traj.csv", std::process::id()));
    let output = alcmv(&[
        "flow",
        "--coeffs",
        coeffs.to_str().unwrap(),
        "--hamiltonian",
        "AL",
        "--t",
        "2",
        "--dt",
        "0.002",
        "--monitor-every",
        "50",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let json = stdout_json(&output);
    let maxmod_drift = json["drift"]["maxmod"].as_f64().unwrap();
    assert!(maxmod_drift < 1e-8, "maxmod drift {maxmod_drift}");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "t,alpha0_re,alpha0_im,alpha1_re,alpha1_im,K0,ReK1,ImK1,ReK2,ImK2,unitarity,maxmod"
    );
    assert!(csv.lines().count() > 10);
}

#[test]
fn flow_zero_time_single_record() {
    let coeffs = write_temp(
        "p4.json",
        r#"{"case": "periodic", "alphas": [[0.1, 0.2], [0.3, 0.0], [0.0, -0.4], [0.2, 0.1]]}"#,
    );
    let mut csv_path = std::env::temp_dir();
    csv_path.push(format!("alcmv-test-{}-traj0.csv", std::process::id()));
    let output = alcmv(&[
        "flow",
        "--coeffs",
        coeffs.to_str().unwrap(),
        "--t",
        "0",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let json = stdout_json(&output);
    assert_eq!(json["records"], 1);
    assert!(json["drift"]
        .as_object()
        .unwrap()
        .values()
        .all(|v| v.as_f64().unwrap() == 0.0));
}

#[test]
fn flow_step_rejection_exits_three() {
    // Near the boundary every trial step of this size leaves the disk, so
    // twenty halvings cannot save it.
    let coeffs = write_temp(
        "edge.json",
        r#"{"case": "periodic", "alphas": [[0.99999999, 0.0], [0.99999999, 0.0]]}"#,
    );
    let mut csv_path = std::env::temp_dir();
    csv_path.push(format!("alcmv-test-{}-edge.csv", std::process::id()));
    let output = alcmv(&[
        "flow",
        "--coeffs",
        coeffs.to_str().unwrap(),
        "--t",
        "100000",
        "--dt",
        "100000",
        "--out",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn discriminant_free_case_values() {
    let coeffs = write_temp(
        "free2.json",
        r#"{"case": "periodic", "alphas": [[0.0, 0.0], [0.0, 0.0]]}"#,
    );
    let output = alcmv(&[
        "discriminant",
        "--coeffs",
        coeffs.to_str().unwrap(),
        "--grid",
        "4",
    ]);
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,delta_re,delta_im,closed_form");
    let expected = [2.0, 0.0, -2.0, 0.0];
    for (line, expect) in lines.zip(expected) {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!((fields[1] - expect).abs() < 1e-12, "line {line}");
        assert!(fields[2].abs() < 1e-12, "imaginary part in {line}");
        assert!((fields[3] - expect).abs() < 1e-12, "closed form in {line}");
    }
}

#[test]
fn invariants_schema() {
    let coeffs = write_temp(
        "inv.json",
        r#"{"case": "periodic", "alphas": [[0.5, 0.0], [0.3, 0.0]]}"#,
    );
    let output = alcmv(&["invariants", "--coeffs", coeffs.to_str().unwrap()]);
    assert!(output.status.success());
    let json = stdout_json(&output);
    assert_eq!(json["K"].as_array().unwrap().len(), 3);
    // K_1 = -0.30 for this pair.
    assert!((json["K"][0][0].as_f64().unwrap() + 0.30).abs() < 1e-12);
    assert!(json["K0"].as_f64().unwrap() > 0.0);
    assert_eq!(json["c"].as_array().unwrap().len(), 3);
    assert_eq!(json["invariant_vector"].as_array().unwrap().len(), 2);
}

#[test]
fn dump_sparse_csv() {
    let coeffs = write_temp(
        "dump.json",
        r#"{"case": "finite", "alphas": [[0.6, 0.0], [-1.0, 0.0]]}"#,
    );
    let output = alcmv(&["dump", "--coeffs", coeffs.to_str().unwrap()]);
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "row,col,re,im");
    // C_f = [[0.6, -0.8], [0.8, 0.6]]: four nonzero entries.
    assert_eq!(lines.count(), 4);
}

#[test]
fn selftest_passes() {
    let output = alcmv(&["selftest"]);
    assert!(output.status.success(), "{output:?}");
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.contains("all checks passed"));
    assert!(text.contains("experimental transfer-route"));
}
