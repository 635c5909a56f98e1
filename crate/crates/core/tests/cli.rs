use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fractel::config::parse_config;
use serde_json::Value;

const BASIC: &str = "rho = 0.6\nalpha = 2.0\n\n[phi1]\nkind = \"parabola\"\n";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fractel"));
    for (k, _) in std::env::vars() {
        if k.starts_with("FRACTEL_") {
            c.env_remove(k);
        }
    }
    c
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &Path, cfg: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn ml_prints_one_csv_line() {
    let o = bin()
        .args(["ml", "--rho", "1", "--mu", "1", "--re", "1", "--im", "0"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let line = String::from_utf8(o.stdout).unwrap();
    let f: Vec<f64> = line.trim().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(f.len(), 3);
    assert!((f[0] - std::f64::consts::E).abs() < 1e-14);
    assert_eq!(f[1], 0.0);
    assert!(f[2] >= 0.0 && f[2] < 1e-12);
    // 17 significant digits
    assert_eq!(line.split(',').next().unwrap(), "2.7182818284590451e0");
}

#[test]
fn ml_rejects_bad_arguments() {
    let o = bin()
        .args(["ml", "--rho", "0.5", "--mu", "1", "--gamma", "3", "--re", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["ml", "--rho", "0.5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_on_zero_data_writes_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rho = 0.4\nalpha = 1.0\nK = 8\nN_t = 16\nM_x = 10\n");
    let o = run_in(dir.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,t,w,u,dxx,drho,drho2,residual");
    let mut rows = 0;
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(f.len(), 8);
        assert!(f[2..].iter().all(|v| *v == 0.0), "{l}");
        rows += 1;
    }
    assert_eq!(rows, 11 * 16);
    let j = json(dir.path(), "solution.json");
    assert_eq!(j["schema_version"], 1);
    assert_eq!(j["passed"], true);
}

#[test]
fn solve_echoes_an_equivalent_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BASIC}\n[[source]]\nmode = 2\ncoeffs = [1.0]\n"));
    let o = run_in(dir.path(), &cfg, &["solve"]);
    assert!(o.status.success());
    let echoed = std::fs::read_to_string(dir.path().join("out/config.toml")).unwrap();
    let original = std::fs::read_to_string(&cfg).unwrap();
    assert_eq!(parse_config(&echoed).unwrap(), parse_config(&original).unwrap());
    let j = json(dir.path(), "solution.json");
    assert_eq!(j["degenerate_modes"], serde_json::json!([2]));
    assert!(j["norms"]["residual_sup"].as_f64().unwrap() <= 1e-6);
    assert!(j["tail"]["bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn oracle_default_case_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BASIC);
    let o = run_in(dir.path(), &cfg, &["oracle"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/oracle.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,y_solver,y_oracle,relerr");
    let mut worst = 0.0f64;
    let mut n = 0;
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(f[0] >= 0.1);
        worst = worst.max(f[3]);
        n += 1;
    }
    assert!(n > 10);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn verify_passes_and_corruption_is_caught() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rho = 0.6\nalpha = 2.0\nK = 32\nN_t = 64\nM_x = 100\n\n\
         [phi1]\nkind = \"parabola\"\n\n[sweep]\ncount = 10\n",
    );
    let o = run_in(dir.path(), &cfg, &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let j = json(dir.path(), "verify.json");
    assert_eq!(j["schema_version"], 1);
    assert_eq!(j["failed"], serde_json::json!([]));
    assert!(j["fitted"]["sector_constant"].as_f64().unwrap() > 0.0);

    let o = run_in(dir.path(), &cfg, &["verify", "--corrupt"]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(dir.path(), "verify.json");
    let failed: Vec<&str> = j["failed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(failed.contains(&"residual"), "{failed:?}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL residual"));
}

#[test]
fn converge_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "rho = 0.6\nalpha = 2.0\nM_x = 60\n\n[phi1]\nkind = \"parabola\"\n\n\
         [converge]\nmodes = [8, 16, 32]\ngrids = [32, 64]\n",
    );
    let o = run_in(dir.path(), &cfg, &["converge"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/converge.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "modes,n_t,w_sup,residual_sup,residual_l2,tail_bound,data_residual"
    );
    assert_eq!(csv.lines().count(), 7);
    let j = json(dir.path(), "converge.json");
    // coefficients decay like k^{-3}, so the sup truncation error goes like K^{-2}
    let slope = j["observed_decay"].as_f64().unwrap();
    assert!((-2.3..-1.7).contains(&slope), "{slope}");
}

#[test]
fn configuration_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "alpha = 1.0\nrho = 1.5\n");
    let o = run_in(dir.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rho must lie in (0,1)") && err.contains("line 2"), "{err}");

    let cfg = write_config(dir.path(), "rho = 0.5\nalpha = 1.0\nbogus = 1\n");
    let o = run_in(dir.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = bin().arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tolerance_scale_turns_checks_into_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rho = 0.6\nalpha = 2.0\nK = 16\nN_t = 32\n\n[phi1]\nkind = \"parabola\"\n");
    let o = run_in(dir.path(), &cfg, &["--tolerance-scale", "1e-20", "solve"]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(dir.path(), "solution.json");
    assert_eq!(j["passed"], false);
    let o = run_in(dir.path(), &cfg, &["--tolerance-scale", "-1", "solve"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rho = 0.4\nalpha = 1.0\nK = 4\nN_t = 8\nM_x = 4\n");
    let out = dir.path().join("from-env");
    let o = bin()
        .env("FRACTEL_CONFIG", &cfg)
        .env("FRACTEL_OUT", &out)
        .env("FRACTEL_THREADS", "1")
        .arg("solve")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("solution.csv").exists());
}
