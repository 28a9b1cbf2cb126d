use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use dolbeault_ns::dolbeault::dbar;
use dolbeault_ns::initial::random_form;
use dolbeault_ns::io::{load_field, load_trajectory, save_field, FieldMetadata};
use dolbeault_ns::SpectralGrid;
use serde_json::Value;

fn dbns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbns"))
        .args(args)
        .env("DBNS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const STOKES_MODE: &str = r#"{
    "n": 2, "q": 1, "N": 8, "mu": 0.1, "T": 1.0, "dt": 0.00390625,
    "nonlinearity": {"kind": "stokes"},
    "output_stride": 1, "seed": 0,
    "initial": {"kind": "single_mode", "zeta": [0, 1, 0, 0], "component": [1], "re": 0.7, "im": -0.2}
}"#;

const LAMB_RANDOM: &str = r#"{
    "n": 2, "q": 1, "N": 8, "mu": 0.1, "T": 0.1, "dt": 0.01,
    "nonlinearity": {"kind": "lamb"},
    "output_stride": 5, "seed": 42,
    "initial": {"kind": "random_solenoidal", "decay": 2.0, "amplitude": 1.0}
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn simulate(dir: &Path, config: &str, out: &str) -> String {
    let cfg = write_config(dir, &format!("{out}.json"), config);
    let out = dir.join(out).to_str().unwrap().to_string();
    let result = dbns(&["simulate", "--config", &cfg, "--out", &out]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    out
}

#[test]
fn verify_all_passes() {
    let out = dbns(&["verify", "--op", "all", "--n", "2", "--q", "1", "--N", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["pass"], true);
    for name in ["complex_identity", "adjointness", "leray_idempotence", "key1", "frechet"] {
        assert!(report["checks"][name]["value"].as_f64().unwrap() < 1e-10, "{name}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(dbns(&["verify", "--n", "2"]).status.code(), Some(2));
    assert_eq!(dbns(&["verify", "--op", "curl", "--n", "2", "--q", "1", "--N", "8"]).status.code(), Some(2));
    assert_eq!(dbns(&["verify", "--n", "2", "--q", "1", "--N", "6"]).status.code(), Some(2));
    assert_eq!(dbns(&["frobnicate"]).status.code(), Some(2));
    let missing = dbns(&["simulate", "--config", "/nonexistent/config.json", "--out", "/tmp/never"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"n": 2, "q": 1}"#);
    let out = dir.path().join("out");
    let result = dbns(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn simulate_writes_trajectory_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), LAMB_RANDOM, "run");
    let root = Path::new(&out);
    assert!(root.join("manifest.json").is_file());
    for m in 0..3 {
        assert!(root.join(format!("u_{m:06}")).join("manifest.json").is_file());
        assert!(root.join(format!("p_{m:06}")).join("manifest.json").is_file());
    }
    assert!(!root.join("u_000003").exists());
    let csv = std::fs::read_to_string(root.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,energy,dbar_norm_sq,dbar_star_residual,max_abs_u,lps_accum")
    );
    assert_eq!(lines.count(), 11);
    let traj = load_trajectory(root).unwrap();
    assert_eq!(traj.times.len(), 3);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap(), traj.config.hash());
}

fn same_tree(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = std::fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    let mut other: Vec<_> = std::fs::read_dir(b).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    other.sort();
    names == other
        && names.iter().all(|name| {
            let (x, y) = (a.join(name), b.join(name));
            if x.is_dir() {
                same_tree(&x, &y)
            } else {
                std::fs::read(&x).unwrap() == std::fs::read(&y).unwrap()
            }
        })
}

#[test]
fn simulate_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), LAMB_RANDOM, "a");
    let b = simulate(dir.path(), LAMB_RANDOM, "b");
    assert!(same_tree(Path::new(&a), Path::new(&b)));
}

#[test]
fn norms_match_single_mode_heat_solution() {
    let dir = tempfile::tempdir().unwrap();
    let traj = simulate(dir.path(), STOKES_MODE, "heat");
    let out = dbns(&["norms", "--traj", &traj, "--k", "0", "--s", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    let values = &report["values"];
    let get = |key: &str| values[key].as_f64().unwrap();

    let (mu, horizon): (f64, f64) = (0.1, 1.0);
    let rate = mu / 4.0;
    let e0 = (0.7f64.powi(2) + 0.2f64.powi(2)) * (2.0 * PI).powi(4);
    // three spatial multi-indices along the excited axis plus one time derivative
    let dissipation = 1.0 + mu * (1.0 - (-2.0 * rate * horizon).exp()) / (2.0 * rate);
    let vel = ((3.0 + rate * rate) * e0 * dissipation).sqrt();
    assert!((get("bochner_vel") - vel).abs() < 1e-6 * vel, "{} vs {vel}", get("bochner_vel"));

    // ‖u(t)‖_{L^5} = |a|·vol^{1/5}·e^{−λt}, 𝔰 = 10
    let s = 10.0;
    let amp = e0.sqrt() / (2.0 * PI).powi(2);
    let a0 = (amp * (2.0 * PI).powf(4.0 / 5.0)).powf(s);
    let lps = a0 * (1.0 - (-s * rate * horizon).exp()) / (s * rate);
    assert!((get("lps") - lps).abs() < 1e-6 * lps, "{} vs {lps}", get("lps"));

    assert_eq!(get("bochner_pre"), 0.0);
    assert_eq!(get("bochner_for"), 0.0);
    assert_eq!(report["params"]["lps_r"], 5.0);
    assert_eq!(report["params"]["lps_s"], 10.0);

    let custom = json(&dbns(&["norms", "--traj", &traj, "--k", "0", "--s", "0", "--lps-r", "8"]));
    assert_eq!(custom["params"]["lps_s"], 4.0);
}

#[test]
fn pressure_tool_recovers_exact_forces() {
    let dir = tempfile::tempdir().unwrap();
    let grid = SpectralGrid::new(2, 8).unwrap();
    let forces = dbar(&random_form(&grid, 0, 1.0, 5).unwrap()).unwrap();
    let f_dir = dir.path().join("f");
    save_field(&f_dir, &forces, &FieldMetadata::default()).unwrap();
    let p_dir = dir.path().join("p");
    let out = dbns(&["pressure", "--forces", f_dir.to_str().unwrap(), "--out", p_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p = load_field(&p_dir).unwrap();
    assert_eq!(p.degree(), 0);
    assert!(dbar(&p).unwrap().sub(&forces).unwrap().norm() < 1e-10 * forces.norm());

    let solenoidal = dolbeault_ns::dolbeault::leray_project(&random_form(&grid, 1, 1.0, 6).unwrap());
    let s_dir = dir.path().join("s");
    save_field(&s_dir, &solenoidal, &FieldMetadata::default()).unwrap();
    let out = dbns(&["pressure", "--forces", s_dir.to_str().unwrap(), "--out", dir.path().join("q").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn linearize_about_saved_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = simulate(dir.path(), LAMB_RANDOM, "base");
    let cfg = write_config(dir.path(), "lin.json", LAMB_RANDOM);
    let out_dir = dir.path().join("lin");
    let out = dbns(&["linearize", "--base-traj", &base, "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lin = load_trajectory(&out_dir).unwrap();
    assert_eq!(lin.times.len(), 3);
    assert!(json(&out)["final_energy"].as_f64().unwrap().is_finite());

    let long = write_config(dir.path(), "long.json", &LAMB_RANDOM.replace("\"T\": 0.1", "\"T\": 0.2"));
    let short = dbns(&["linearize", "--base-traj", &base, "--config", &long]);
    assert_eq!(short.status.code(), Some(2));
}
