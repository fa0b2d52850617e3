use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    report: Value,
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn exec(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rowdil"));
    cmd.args(args).env_remove("ROWDIL_TOL");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_with(command: &str, config: &str, extra: &[&str], envs: &[(&str, &str)]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "config.json", config);
    let out = dir.path().join("report.json");
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let output = exec(&args, envs);
    let report = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    Run {
        code: output.status.code().unwrap(),
        report,
    }
}

fn run(command: &str, config: &str) -> Run {
    run_with(command, config, &[], &[])
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn dilate_compressed_shift_passes() {
    let r = run("dilate", r#"{"space": {"n": 2, "max_degree": 2}, "tuple": {"source": "compressed-shift"}}"#);
    assert_eq!(r.code, 0);
    assert_eq!(r.report["status"], "pass");
    let res = &r.report["results"];
    assert!(f(&res["isometry_defect"]) < 1e-10);
    assert!(f(&res["intertwining_residual"]) < 1e-10);
    assert_eq!(res["minimality_rank"], res["defect_dim"]);
    assert_eq!(res["purity_residuals"][2], 0.0);
}

#[test]
fn dilate_unitary_source_is_not_pure() {
    let r = run("dilate", r#"{"space": {"n": 2}, "tuple": {"source": "unitary", "dim": 3, "scale": 1.0}}"#);
    assert_eq!(r.code, 2);
    assert_eq!(r.report["error"]["kind"], "NotPure");
    assert!(r.report.get("results").is_none());
}

#[test]
fn dilate_shrunk_unitary_source_is_pure() {
    let r = run("dilate", r#"{"space": {"n": 2}, "tuple": {"source": "unitary", "dim": 3, "scale": 0.25}}"#);
    assert_eq!(r.code, 0, "{}", r.report);

    // at scale 0.5 the default cut of 40 leaves an intertwining residual near 0.5^20
    let r = run("dilate", r#"{"space": {"n": 2}, "tuple": {"source": "unitary", "dim": 3, "scale": 0.5}}"#);
    assert_eq!(r.code, 1);
    assert!(f(&r.report["results"]["intertwining_residual"]) > 1e-8);
}

#[test]
fn malformed_tuple_file_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "tuple.json", r#"{"n": 2, "dim": 2, "matrices": [[[1, 0]]]}"#);
    let cfg = write(dir.path(), "config.json", r#"{"space": {"n": 2}, "tuple": {"source": "file", "path": "tuple.json"}}"#);
    let out = dir.path().join("r.json");
    let output = exec(&["dilate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(3));

    // well-formed JSON with the wrong shapes
    write(dir.path(), "tuple.json", r#"{"n": 2, "dim": 2, "matrices": [[[[1, 0]]], [[[1, 0]]]]}"#);
    let output = exec(&["dilate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn tuple_file_round_trip_runs() {
    let dir = TempDir::new().unwrap();
    let t = rowdil_tuple_file();
    write(dir.path(), "tuple.json", &t);
    let cfg = write(dir.path(), "config.json", r#"{"space": {"n": 1}, "tuple": {"source": "file", "path": "tuple.json"}}"#);
    let out = dir.path().join("r.json");
    let output = exec(&["dilate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["results"]["defect_dim"], 1);
}

/// The scalar contraction `1/2` on `C^1`.
fn rowdil_tuple_file() -> String {
    r#"{"n": 1, "dim": 1, "matrices": [[[[0.5, 0.0]]]]}"#.to_string()
}

#[test]
fn missing_or_invalid_config_exits_3() {
    let output = exec(&["dilate", "--config", "/nonexistent/config.json"], &[]);
    assert_eq!(output.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(report["error"]["kind"], "Io");

    let r = run("dilate", r#"{"space": {"n": 2}, "tuple": {"source": "teleport"}}"#);
    assert_eq!(r.code, 3);
    let r = run("dilate", r#"{"space": {"n": 2}, "tuple": {"source": "compressed-shift"}, "typo": 1}"#);
    assert_eq!(r.code, 3);
    let r = run("dilate", r#"{"command": "multnorm", "space": {"n": 2}, "tuple": {"source": "compressed-shift"}}"#);
    assert_eq!(r.code, 3);
}

#[test]
fn bad_arguments_exit_3() {
    assert_eq!(exec(&["dilate"], &[]).status.code(), Some(3));
    assert_eq!(exec(&["frobnicate", "--config", "x"], &[]).status.code(), Some(3));
    assert_eq!(exec(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn tolerance_override_from_environment() {
    let cfg = r#"{"space": {"n": 2}, "tuple": {"source": "random", "dim": 3, "scale": 0.3}, "probe": {"n_cut": 60}}"#;
    let r = run_with("dilate", cfg, &[], &[("ROWDIL_TOL", "1e-4")]);
    assert_eq!(r.code, 0);
    assert_eq!(r.report["tolerances"]["residual_tol"], 1e-4);

    // roundoff alone exceeds this threshold, so the isometry check fails
    let r = run_with("dilate", cfg, &[], &[("ROWDIL_TOL", "1e-17")]);
    assert_eq!(r.code, 1, "{}", r.report);
    assert_eq!(r.report["status"], "fail");

    let r = run_with("dilate", cfg, &[], &[("ROWDIL_TOL", "tight")]);
    assert_eq!(r.code, 3);
    let r = run_with("dilate", cfg, &[], &[("ROWDIL_TOL", "2")]);
    assert_eq!(r.code, 3);
}

#[test]
fn seed_flag_overrides_config() {
    let cfg = r#"{"space": {"n": 2}, "tuple": {"source": "random", "dim": 3, "scale": 0.5, "seed": 1}}"#;
    let a = run_with("dilate", cfg, &["--seed", "5"], &[]);
    let b = run_with("dilate", cfg, &["--seed", "6"], &[]);
    let c = run_with("dilate", cfg, &[], &[]);
    assert_eq!(a.report["config"]["seed"], 5);
    assert_ne!(a.report["results"]["purity_residuals"], b.report["results"]["purity_residuals"]);
    assert_ne!(a.report["results"]["purity_residuals"], c.report["results"]["purity_residuals"]);
    let again = run_with("dilate", cfg, &["--seed", "5"], &[]);
    assert_eq!(a.report["results"], again.report["results"]);
}

#[test]
fn wandering_dimensions() {
    let r = run("wandering", r#"{"space": {"n": 2, "max_degree": 6}, "subspace": {"kind": "zero-based", "a": [[0.5, 0], [0, 0]]}}"#);
    assert_eq!(r.code, 0);
    let res = &r.report["results"];
    assert_eq!(res["model"], "kernel-augmented");
    assert_eq!(res["wandering_dim_direct"], 1);
    assert_eq!(res["wandering_dim_representation"], 1);
    assert_eq!(res["graded_model"]["wandering_dim"], 1);
    assert!(f(&res["agreement_gap"]) < 1e-8);

    let r = run("wandering", r#"{"space": {"n": 3, "max_degree": 4}, "subspace": {"kind": "zero-based", "a": [[0, 0], [0, 0], [0, 0]]}}"#);
    assert_eq!(r.code, 0);
    assert_eq!(r.report["results"]["wandering_dim_direct"], 3);
    assert_eq!(r.report["results"]["generating"], true);

    let r = run("wandering", r#"{"space": {"n": 2, "max_degree": 4}, "subspace": {"kind": "full"}}"#);
    assert_eq!(r.code, 0);
    assert_eq!(r.report["results"]["wandering_dim_direct"], 1);

    let r = run("wandering", r#"{"space": {"n": 2, "max_degree": 4}, "subspace": {"kind": "zero-based", "a": [[0.9, 0], [0.9, 0]]}}"#);
    assert_eq!(r.code, 2);
    assert_eq!(r.report["error"]["kind"], "PointOutsideBall");
}

#[test]
fn wandering_rejects_a_non_invariant_file_subspace() {
    let dir = TempDir::new().unwrap();
    // the constants in P_2 over the disc: not invariant
    write(dir.path(), "s.json", r#"{"basis": [[[1, 0]], [[0, 0]], [[0, 0]]]}"#);
    let cfg = write(dir.path(), "config.json", r#"{"space": {"n": 1, "max_degree": 2}, "subspace": {"kind": "file", "path": "s.json"}}"#);
    let out = dir.path().join("r.json");
    let output = exec(&["wandering", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2));
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["error"]["kind"], "NotInvariant");
}

#[test]
fn multnorm_examples() {
    let r = run("multnorm", r#"{"space": {"n": 2, "lambda": 1}, "polynomial": {"terms": [{"k": [1, 1], "c": [1, 0]}]}}"#);
    assert_eq!(r.code, 0);
    let res = &r.report["results"];
    assert!((f(&res["max_block"]) - f(&res["hk_norm"])).abs() < 1e-9);
    assert!((f(&res["hk_norm"]) - 0.5f64.sqrt()).abs() < 1e-15);

    let r = run("multnorm", r#"{"space": {"n": 2}, "polynomial": {"terms": [{"k": [0, 0], "c": [0.5, 0]}]}}"#);
    assert_eq!(r.code, 0);

    let r = run("multnorm", r#"{"space": {"n": 2}, "polynomial": {"terms": [{"k": [0, 0], "c": [1, 0]}, {"k": [1, 0], "c": [1, 0]}]}}"#);
    assert_eq!(r.code, 2);
    assert_eq!(r.report["error"]["kind"], "NotQuasiHomogeneous");
}

#[test]
fn probe_range_table_and_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "config.json",
        r#"{"space": {"n": 2}, "polynomial": {"terms": [{"k": [1, 0], "c": [1, 0]}]}, "probe": {"n_list": [2, 3, 4]}}"#,
    );
    let out = dir.path().join("r.json");
    let csv = dir.path().join("t.csv");
    let output = exec(
        &["probe-range", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
        &[],
    );
    assert_eq!(output.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["results"]["strictly_decreasing"], true);
    let table = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "N,smallest_nonzero_singular_value");
    assert_eq!(lines.len(), 4);
    let v: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.5).abs() < 1e-12);
}

#[test]
fn uniqueness_recovers_fiber_maps() {
    let r = run(
        "uniqueness",
        r#"{"space": {"n": 2}, "tuple": {"source": "random", "dim": 3, "scale": 0.4}, "probe": {"trials": 4}, "seed": 3}"#,
    );
    assert_eq!(r.code, 0, "{}", r.report);
    assert_eq!(r.report["results"]["trials"].as_array().unwrap().len(), 4);
    assert!(f(&r.report["results"]["worst"]) < 1e-8);
}

#[test]
fn batch_is_sorted_and_aggregates_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "config.json",
        r#"{"space": {"n": 2, "max_degree": 2}, "tuple": {"source": "compressed-shift"},
            "experiments": [
              {"id": "z-mult", "command": "multnorm", "polynomial": {"terms": [{"k": [1, 1], "c": [1, 0]}]}},
              {"id": "b-bad", "command": "multnorm", "polynomial": {"terms": [{"k": [0, 0], "c": [1, 0]}, {"k": [1, 0], "c": [1, 0]}]}},
              {"id": "a-dil", "command": "dilate"}
            ]}"#,
    );
    let out = dir.path().join("r.json");
    let csv = dir.path().join("t.csv");
    let output = exec(
        &["batch", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
        &[],
    );
    assert_eq!(output.status.code(), Some(2));
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    let ids: Vec<&str> = report["experiments"].as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["a-dil", "b-bad", "z-mult"]);
    assert_eq!(report["experiments"][0]["exit_code"], 0);
    assert_eq!(report["experiments"][1]["exit_code"], 2);
    let table = fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("experiment,row,column,value\n"));
    assert!(table.contains("a-dil,0,m,1"));
    assert!(table.contains("z-mult,0,block,"));

    // a single command refuses a batch config
    let output = exec(&["dilate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("s.json").to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn reports_differ_only_in_timestamp() {
    let cfg = r#"{"space": {"n": 2}, "tuple": {"source": "random", "dim": 3, "scale": 0.5}, "seed": 9}"#;
    let mut a = run("uniqueness", cfg).report;
    let mut b = run("uniqueness", cfg).report;
    assert!(a["timestamp"].is_string());
    a.as_object_mut().unwrap().remove("timestamp");
    b.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
