use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(cmd: &str, config: &str, sets: &[&str], out: &Path) -> (i32, Duration) {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mincurv"));
    c.arg(cmd).arg("--config").arg(configs().join(config)).arg("--out").arg(out);
    for s in sets {
        c.arg("--set").arg(s);
    }
    let start = Instant::now();
    let status = c.output().expect("spawn mincurv").status;
    (status.code().unwrap_or(-1), start.elapsed())
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&std::fs::read(&path).unwrap_or_else(|_| panic!("missing {}", path.display()))).unwrap()
}

#[test]
fn solve_fig1_lists_small_and_large() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("solve", "fig1.toml", &[], dir.path());
    assert_eq!(code, 0);
    let s = json(dir.path().join("solve.json"));
    let fams: Vec<&str> = s["orbits"].as_array().unwrap().iter().map(|o| o["family"].as_str().unwrap()).collect();
    assert_eq!(fams, ["small", "large"]);
    for o in s["orbits"].as_array().unwrap() {
        assert!(o["verification"]["passed"].as_bool().unwrap());
        assert!(o["residual"].as_f64().unwrap() <= 1e-8);
    }
    let csv = std::fs::read_to_string(dir.path().join("orbit_0_small.csv")).unwrap();
    assert!(csv.starts_with("t,u,u_prime,x2\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 2049);

    let m = json(dir.path().join("manifest.json"));
    let bytes = std::fs::read(configs().join("fig1.toml")).unwrap();
    assert_eq!(m["config_sha256"].as_str().unwrap(), mincurv::output::sha256_hex(&bytes));
    assert_eq!(m["version"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
    assert!(m["wall_time_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_lambda_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run("solve", "fig1.toml", &["problem.lambda=0"], dir.path());
    assert_eq!(code, 2);
    let d = json(dir.path().join("diagnostic.json"));
    assert_eq!(d["exit_code"], 2);
    assert!(!dir.path().join("solve.json").exists());
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "fig1.toml", &["solver.newton_tolerance=1e-9"], dir.path()).0, 2);
}

#[test]
fn uncertified_twist_exits_with_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    // one period is too short for the linearized rotation to reach 2π
    let (code, _) = run("subharmonic", "fig1.toml", &["problem.lambda=20", "subharmonic.k=1"], dir.path());
    assert_eq!(code, 3);
    let d = json(dir.path().join("diagnostic.json"));
    assert_eq!(d["kind"], "check_failed");
    assert_eq!(d["detail"]["verdict"], false);
}

#[test]
fn constant_potential_spectrum() {
    for c in [-2.0, 0.0, 3.0] {
        let dir = tempfile::tempdir().unwrap();
        let q = format!("spectrum.q_c0={c}");
        let (code, _) = run("spectrum", "fig1.toml", &["spectrum.source=analytic", &q, "spectrum.f_samples=5"], dir.path());
        assert_eq!(code, 0);
        let e = json(dir.path().join("eigen.json"));
        assert!((e["mu0"].as_f64().unwrap() + c).abs() <= 1e-8, "{c}: {}", e["mu0"]);
        assert_eq!(e["zeros_of_w"], 0);
        let f = std::fs::read_to_string(dir.path().join("f_samples.csv")).unwrap();
        assert_eq!(f.lines().count(), 6);
    }
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run("solve", "fig1.toml", &[], a.path()).0, 0);
    assert_eq!(run("solve", "fig1.toml", &[], b.path()).0, 0);
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for n in names.iter().filter(|n| n.to_str() != Some("manifest.json")) {
        assert_eq!(std::fs::read(a.path().join(n)).unwrap(), std::fs::read(b.path().join(n)).unwrap(), "{n:?}");
    }
    let (ma, mb) = (json(a.path().join("manifest.json")), json(b.path().join("manifest.json")));
    assert_eq!(ma["artifacts"], mb["artifacts"]);
}

#[test]
fn fig2_scan_and_branch() {
    let dir = tempfile::tempdir().unwrap();
    let (code, t) = run("scan", "fig2.toml", &[], dir.path());
    assert_eq!(code, 0);
    assert!(t < Duration::from_secs(120), "{t:?}");
    let s = json(dir.path().join("scan.json"));
    let (lo, hi) = (s["onset_bracket"][0].as_f64().unwrap(), s["onset_bracket"][1].as_f64().unwrap());

    let (code, _) = run("branch", "fig2.toml", &[], dir.path());
    assert_eq!(code, 0);
    let b = json(dir.path().join("branch.json"));
    let folds = b["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 1);
    let fold = folds[0]["lambda"].as_f64().unwrap();
    let cell = hi - lo;
    assert!(fold >= lo - cell && fold <= hi + cell, "fold {fold} vs ({lo}, {hi}]");
    let csv = std::fs::read_to_string(dir.path().join("branch.csv")).unwrap();
    assert!(csv.starts_with("lambda,x1_0,x2_0,sup_norm,class,fold_flag\n"));
    assert_eq!(csv.lines().filter(|l| l.ends_with(",1")).count(), 1);
}

#[test]
fn fig3_and_fig4_asymptotics() {
    let dir = tempfile::tempdir().unwrap();
    let (code, t) = run("asymptotic", "fig3.toml", &[], dir.path());
    assert_eq!(code, 0);
    assert!(t < Duration::from_secs(600), "{t:?}");
    let csv = std::fs::read_to_string(dir.path().join("asymptotic.csv")).unwrap();
    assert!(csv.starts_with("lambda,sup_norm,scaled_norm,band_fraction_0,band_fraction_pm1,w11_distance\n"));
    assert_eq!(csv.lines().count(), 12);

    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("asymptotic", "fig4.toml", &[], dir.path()).0, 0);
    let a = json(dir.path().join("asymptotic.json"));
    assert!(a["limit"]["plateau"]["covered_fraction"].as_f64().unwrap() >= 0.8);
}
