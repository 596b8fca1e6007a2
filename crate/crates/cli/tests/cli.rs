use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn gcbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gcbf"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn pointwise_50_completes() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcbf(&[
        "run",
        scenario("acc_ptw50.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("acc_ptw50_simlog.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("acc_ptw50_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["status"], "completed");
    assert!(summary["max_h"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn pointwise_10_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcbf(&[
        "run",
        scenario("acc_ptw10.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!([2, 3].contains(&code(&out)));
}

#[test]
fn gcbf_default_scenario_exit_code_matches_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcbf(&[
        "run",
        scenario("acc_gcbf.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("acc_gcbf_summary.json")).unwrap(),
    )
    .unwrap();
    let expected = match summary["status"].as_str().unwrap() {
        "completed" => 0,
        "violated_at" | "startup_violation" => 2,
        "infeasible_at" => 3,
        _ => 5,
    };
    assert_eq!(code(&out), expected);
}

#[test]
fn braking_scenario_completes_with_strategy_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcbf(&[
        "run",
        scenario("braking_gcbf.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--steps",
        "30",
        "--strategy",
        "pointwise:n_c=20",
    ]);
    assert_eq!(code(&out), 0);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("braking_gcbf_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["strategy"], "pointwise:n_c=20");
    assert_eq!(summary["steps_completed"], 30);
}

#[test]
fn configuration_errors_exit_4() {
    assert_eq!(code(&gcbf(&["run", "/nonexistent/scenario.json"])), 4);
    assert_eq!(code(&gcbf(&["run", "x.json", "--no-such-flag"])), 4);
    assert_eq!(code(&gcbf(&["frobnicate"])), 4);
    assert_eq!(code(&gcbf(&["run", "x.json", "--strategy", "nope:x=1"])), 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"plant": {"model": "acc", "initial_state": [0, 0, 0]},
            "strategy": {"name": "gcbf", "lambda": 0.01, "m": 2},
            "simulation": {"horizn": 50}}"#,
    )
    .unwrap();
    let out = gcbf(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 4);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("simulation") && stderr.contains("horizn"),
        "{stderr}"
    );

    let out = gcbf(&[
        "bench",
        scenario("braking_gcbf.json").to_str().unwrap(),
        "--repetitions",
        "2",
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(code(&gcbf(&["--help"])), 0);
    assert_eq!(code(&gcbf(&["--version"])), 0);
    assert_eq!(code(&gcbf(&["run", "--help"])), 0);
}

#[test]
fn map_writes_one_map_per_strategy_and_one_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("acc_ptw50.json")).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["grid"]["delta_d"]["points"] = 3.into();
    doc["grid"]["delta_v"]["points"] = 2.into();
    let path = dir.path().join("tiny.json");
    std::fs::write(&path, doc.to_string()).unwrap();
    let out_dir = dir.path().join("out");
    let out = gcbf(&[
        "map",
        path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--steps",
        "10",
        "--workers",
        "1",
        "--strategy",
        "gcbf:lambda=0.01,m=2",
        "--strategy",
        "pointwise:n_c=50",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "tiny_compare_gcbf_l0.01_m2_vs_ptw50.json",
            "tiny_diff_gcbf_l0.01_m2_vs_ptw50.csv",
            "tiny_map_gcbf_l0.01_m2.csv",
            "tiny_map_gcbf_l0.01_m2.dat",
            "tiny_map_ptw50.csv",
            "tiny_map_ptw50.dat",
        ]
    );
}

#[test]
fn bench_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = gcbf(&[
        "bench",
        scenario("braking_gcbf.json").to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--steps",
        "10",
        "--repetitions",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("braking_gcbf_bench.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["baseline"], "pointwise:n_c=20");
    assert_eq!(report["strategies"].as_array().unwrap().len(), 2);
    assert_eq!(report["strategies"][1]["samples"], 30);
    assert!(dir.path().join("braking_gcbf_bench.csv").exists());
}
