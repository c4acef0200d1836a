use std::path::{Path, PathBuf};
use std::process::Command;

use asymlink::config::RunConfig;
use asymlink::linking::ClosedCurve;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asymlink"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = bin()
        .arg("--config")
        .arg(config)
        .arg("--output")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .status()
        .unwrap();
    status.code().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn every_shipped_config_loads_and_validates() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let again = RunConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(RunConfig { base_dir: cfg.base_dir.clone(), ..again }, cfg);
            n += 1;
        }
    }
    assert!(n >= 10);
}

#[test]
fn split_link_from_csv_curves() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&configs_dir().join("link_split.toml"), out.path(), &[]), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("link.json")).unwrap()).unwrap();
    assert!(v["gauss"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(v["oracle"].as_i64(), Some(0));
}

#[test]
fn hopf_cores_link_once() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&configs_dir().join("link_hopf_cores.toml"), out.path(), &[]), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.path().join("link.json")).unwrap()).unwrap();
    assert!((v["gauss"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v["oracle"].as_i64(), Some(1));
}

#[test]
fn invalid_minor_radius_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "schema_version = 1\ncommand = \"verify\"\n[fields]\npreset = \"hopf_pair\"\nminor_radius = 0.5\n",
    );
    let out = bin().arg("--config").arg(&cfg).arg("--output").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < a < 1/2"));
}

#[test]
fn missing_config_and_bad_flags_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&dir.path().join("absent.toml"), dir.path(), &[]), 1);
    let status = bin().arg("--bogus").status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn failed_verification_exits_with_acceptance_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "strict.toml",
        r#"schema_version = 1
command = "verify"
[horizon]
T = 1.5
S = 1.5
[lambda]
n_samples = 4
[helicity]
potential_grid = { spacing = 0.05 }
[verify]
relative_tolerance = 1e-9
stderr_factor = 1e-9
decay_schedule = []
"#,
    );
    assert_eq!(run(&cfg, dir.path(), &[]), 3);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    assert!(dir.path().join("report.csv").is_file());
}

#[test]
fn outputs_are_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "lambda.toml",
        r#"schema_version = 1
command = "lambda"
seed = 11
[horizon]
T = 6.0
S = 6.0
[lambda]
mode = "both"
n_samples = 6
"#,
    );
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run(&cfg, &a, &["--workers", "1"]), 0);
    assert_eq!(run(&cfg, &b, &["--workers", "3"]), 0);
    assert_eq!(run(&cfg, &c, &["--seed", "12"]), 0);
    let read = |d: &Path| std::fs::read(d.join("lambda.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let text = String::from_utf8(read(&a)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x0_x,x0_y,x0_z,y0_x,y0_y,y0_z,T,S,mode,value,discarded,weight");
    assert_eq!(text.lines().count(), 1 + 2 * 6);
}

#[test]
fn converge_writes_table_with_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "conv.toml",
        r#"schema_version = 1
command = "converge"
seed = 2
[converge]
n_pairs = 3
schedule = [{ T = 3.0, S = 3.0 }, { T = 6.0, S = 6.0 }]
"#,
    );
    assert_eq!(run(&cfg, dir.path(), &[]), 0);
    let text = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "T,S,lambda_mean,l1_increment,term1,term2,term3");
    assert_eq!(lines.count(), 2);
}

#[test]
fn exported_curves_round_trip() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&configs_dir().join("curves_hopf.toml"), out.path(), &[]), 0);
    for name in ["x", "y"] {
        let path = out.path().join(format!("curve_{name}.csv"));
        let curve = ClosedCurve::load_csv(&path).unwrap();
        let again = out.path().join(format!("again_{name}.csv"));
        curve.save_csv(&again).unwrap();
        let back = ClosedCurve::load_csv(&again).unwrap();
        assert_eq!(back.closure_range(), curve.closure_range());
        for (p, q) in back.vertices().iter().zip(curve.vertices()) {
            assert!((*p - *q).norm() <= 1e-15);
        }
        let traj = std::fs::read_to_string(out.path().join(format!("trajectory_{name}.csv"))).unwrap();
        assert_eq!(traj.lines().next().unwrap(), "t,x,y,z");
        // The resampled trajectory is the arc part of the closed curve.
        assert_eq!(traj.lines().count() - 1, curve.closure_range().start + 1);
    }
}

#[test]
fn helicity_json_holds_both_estimates() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run(&configs_dir().join("helicity_hopf.toml"), out.path(), &[]), 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("helicity.json")).unwrap()).unwrap();
    let k = v["kernel"]["extrapolated"].as_f64().unwrap();
    let p = v["potential"].as_f64().unwrap();
    assert!((k - p).abs() < 0.02 * p);
    assert_eq!(v["pass"], true);
}
