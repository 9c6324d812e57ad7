use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const P0: &str = r#"{ "lambda": 0.5, "mu": 0.1, "zeta": 1.0, "xi": 1.0, "r_star": 3.0, "sigma": 1.0 }"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_gridlab"))
            .args(args)
            .env_remove("GRIDLAB_THREADS")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn header(path: &Path) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(String::from).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_noiseless_reaches_target() {
    let sb = Sandbox::new();
    let p = P0.replace("\"sigma\": 1.0", "\"sigma\": 0.0");
    let cfg = sb.config("sim.json", &format!(r#"{{ "params": {p}, "steps": 5 }}"#));
    let out = sb.path("out");
    sb.ok(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    let csv = out.join("trajectory.csv");
    assert_eq!(header(&csv), ["t", "R", "Z", "region", "B", "F", "H_control", "H_lyap"]);
    let rs: Vec<f64> = csv_rows(&csv).iter().map(|r| f(&r[1])).collect();
    assert_eq!(rs, [0.0, 1.0, 2.0, 3.0, 3.0]);
    let stats = json(&out.join("stats.json"));
    assert_eq!(stats["final_state"]["r"], 3.0);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["outputs"], serde_json::json!(["trajectory.csv", "stats.json"]));
    assert_eq!(manifest["config"]["burn_in"], 0);
    assert!(manifest["rng_algorithm"].as_str().unwrap().contains("ChaCha8"));
}

#[test]
fn simulate_is_reproducible_and_seed_overrides() {
    let sb = Sandbox::new();
    let cfg = sb.config("sim.json", &format!(r#"{{ "params": {P0}, "steps": 2000, "seed": 9 }}"#));
    let (a, b, c) = (sb.path("a"), sb.path("b"), sb.path("c"));
    sb.ok(&["simulate", "-c", s(&cfg), "-o", s(&a)]);
    sb.ok(&["simulate", "-c", s(&cfg), "-o", s(&b)]);
    sb.ok(&["simulate", "-c", s(&cfg), "-o", s(&c), "--seed", "10"]);
    let read = |d: &Path| fs::read(d.join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(json(&c.join("manifest.json"))["config"]["seed"], 10);
}

#[test]
fn manifest_config_round_trips() {
    let sb = Sandbox::new();
    let cfg = sb.config("sim.json", &format!(r#"{{ "params": {P0}, "steps": 300, "seed": 2 }}"#));
    let (a, b) = (sb.path("a"), sb.path("b"));
    sb.ok(&["simulate", "-c", s(&cfg), "-o", s(&a)]);
    let echo = json(&a.join("manifest.json"))["config"].clone();
    let cfg2 = sb.config("echo.json", &echo.to_string());
    sb.ok(&["simulate", "-c", s(&cfg2), "-o", s(&b)]);
    assert_eq!(json(&b.join("manifest.json"))["config"], echo);
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn csv_numbers_are_lossless() {
    let sb = Sandbox::new();
    let cfg = sb.config("sim.json", &format!(r#"{{ "params": {P0}, "steps": 50, "seed": 4 }}"#));
    let out = sb.path("out");
    sb.ok(&["simulate", "-c", s(&cfg), "-o", s(&out)]);
    for row in csv_rows(&out.join("trajectory.csv")) {
        let r = &row[1];
        let mantissa = r.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{r}");
        assert_eq!(format!("{:.16e}", f(r)), r);
    }
}

#[test]
fn config_errors_exit_2() {
    let sb = Sandbox::new();
    let missing = P0.replace(", \"sigma\": 1.0", "");
    let cases = [
        (format!(r#"{{ "params": {missing}, "steps": 5 }}"#), "sigma"),
        (format!(r#"{{ "params": {P0}, "steps": 5, "stpes": 3 }}"#), "stpes"),
        (format!(r#"{{ "params": {}, "steps": 5 }}"#, P0.replace("0.1", "0.6")), "mu"),
        (format!(r#"{{ "params": {P0}, "steps": 5, "burn_in": 5 }}"#), "burn_in"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = sb.config(&format!("bad{i}.json"), text);
        let out = sb.run(&["simulate", "-c", s(&cfg), "-o", s(&sb.path("o"))]);
        assert_eq!(out.status.code(), Some(2), "case {i}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "case {i}: {err}");
    }
    let out = sb.run(&["simulate", "-c", s(&sb.path("nope.json")), "-o", s(&sb.path("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_3() {
    let sb = Sandbox::new();
    let p = P0.replace("0.1", "-0.6");
    let cfg = sb.config("sim.json", &format!(r#"{{ "params": {p}, "steps": 10000 }}"#));
    let out = sb.run(&["simulate", "-c", s(&cfg), "-o", s(&sb.path("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn drift_reference_rows() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "drift.json",
        &format!(
            r#"{{ "params": {P0}, "seed": 1, "mc_samples": 0,
                 "points": [ {{ "r": -1.0, "z": 2.0 }}, {{ "r": 2.5, "z": 1.0 }} ] }}"#
        ),
    );
    let out = sb.path("out");
    sb.ok(&["drift", "-c", s(&cfg), "-o", s(&out)]);
    let rows = csv_rows(&out.join("drift.csv"));
    assert_eq!(rows.len(), 2);
    let (a, b) = (&rows[0], &rows[1]);
    assert_eq!(&a[2], "D1");
    assert!((f(&a[3]) - 4.3524).abs() < 1e-9 && (f(&a[4]) - 4.3524).abs() < 1e-9);
    assert_eq!(&a[5], "exact");
    assert_eq!(&b[2], "D3");
    assert!((f(&b[3]) - 8.1716).abs() < 1e-9 && (f(&b[4]) - 13.6716).abs() < 1e-9);
    assert_eq!(&b[5], "upper_bound");
    assert_eq!((&a[6], &a[9], &b[8]), ("NA", "NA", "true"));
}

#[test]
fn drift_sampled_states_all_agree() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "drift.json",
        &format!(r#"{{ "params": {P0}, "seed": 12, "mc_samples": 20000, "per_region": 100 }}"#),
    );
    let out = sb.path("out");
    sb.ok(&["drift", "-c", s(&cfg), "-o", s(&out), "--threads", "4"]);
    let rows = csv_rows(&out.join("drift.csv"));
    assert_eq!(rows.len(), 400);
    for region in ["D1", "D2", "D3", "D4"] {
        assert_eq!(rows.iter().filter(|r| &r[2] == region).count(), 100);
    }
    for r in &rows {
        assert_eq!((&r[8], &r[9]), ("true", "true"), "{r:?}");
    }
}

#[test]
fn drift_zero_evaporation_d1_not_applicable() {
    let sb = Sandbox::new();
    let p = P0.replace("0.1", "0.0");
    let cfg = sb.config(
        "drift.json",
        &format!(r#"{{ "params": {p}, "mc_samples": 0, "points": [ {{ "r": -1.0, "z": 2.0 }}, {{ "r": 1.0, "z": 1.0 }} ] }}"#),
    );
    let out = sb.path("out");
    sb.ok(&["drift", "-c", s(&cfg), "-o", s(&out)]);
    let rows = csv_rows(&out.join("drift.csv"));
    assert_eq!((&rows[0][4], &rows[0][5], &rows[0][8]), ("NA", "NA", "NA"));
    assert_eq!(&rows[1][8], "true");
}

#[test]
fn sweep_separates_regimes() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "sweep.json",
        &format!(
            r#"{{ "params": {P0}, "grid": {{ "mu": [-0.2, -0.1, 0.1, 0.2] }},
                 "experiment": {{ "steps": 100000, "burn_in": 10000, "seed": 8 }} }}"#
        ),
    );
    let out = sb.path("out");
    sb.ok(&["sweep", "-c", s(&cfg), "-o", s(&out)]);
    let csv = out.join("verdicts.csv");
    assert_eq!(header(&csv), ["mu", "lambda", "r_star", "verdict", "ks_distance", "logz_slope", "seeds_used"]);
    let verdicts: Vec<String> = csv_rows(&csv).iter().map(|r| r[3].to_string()).collect();
    assert_eq!(verdicts, ["unstable-consistent", "unstable-consistent", "stable-consistent", "stable-consistent"]);
    let geometry = json(&out.join("geometry.json"));
    let mus: Vec<f64> = geometry.as_array().unwrap().iter().map(|g| g["mu"].as_f64().unwrap()).collect();
    assert_eq!(mus, [0.1, 0.2]);
    assert!((geometry[0]["geometry"]["ellipse"]["alpha"].as_f64().unwrap() - 0.0684).abs() < 1e-12);
}

#[test]
fn sweep_errors() {
    let sb = Sandbox::new();
    let empty = sb.config("empty.json", &format!(r#"{{ "params": {P0}, "grid": {{ "mu": [] }} }}"#));
    assert_eq!(sb.run(&["sweep", "-c", s(&empty), "-o", s(&sb.path("e"))]).status.code(), Some(2));
    let cfg = sb.config(
        "bad.json",
        &format!(
            r#"{{ "params": {P0}, "grid": {{ "mu": [0.7, 0.1] }},
                 "experiment": {{ "steps": 5000, "burn_in": 500, "growth_seeds": 4 }} }}"#
        ),
    );
    let out = sb.path("out");
    let res = sb.ok(&["sweep", "-c", s(&cfg), "-o", s(&out)]);
    let rows = csv_rows(&out.join("verdicts.csv"));
    assert_eq!(&rows[0][3], "error");
    assert_ne!(&rows[1][3], "error");
    assert!(String::from_utf8_lossy(&res.stderr).contains("lambda+mu"));
}

#[test]
fn sweep_threads_from_env() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "sweep.json",
        &format!(
            r#"{{ "params": {P0}, "grid": {{ "mu": [0.1, -0.1] }},
                 "experiment": {{ "steps": 5000, "burn_in": 500, "growth_seeds": 4 }} }}"#
        ),
    );
    let (a, b) = (sb.path("a"), sb.path("b"));
    sb.ok(&["sweep", "-c", s(&cfg), "-o", s(&a), "--threads", "1"]);
    let out = Command::new(env!("CARGO_BIN_EXE_gridlab"))
        .args(["sweep", "-c", s(&cfg), "-o", s(&b)])
        .env("GRIDLAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(a.join("verdicts.csv")).unwrap(), fs::read(b.join("verdicts.csv")).unwrap());
}

const B0: &str = r#"{
  "building": { "k_leak": 1.0, "c_inertia": 9.0, "eps": 3.0 },
  "scenario": { "theta": [0.0, 0.0, 0.0], "demand": [1.0, 1.0, 1.0], "t0_temp": 3.0, "tau": 3,
                "frustration": [FR], "eps_prime": 2.0 }
}"#;

#[test]
fn thermal_ledgers() {
    let sb = Sandbox::new();
    let full = sb.config("b0.json", &B0.replace("FR", "1.0, 1.0"));
    let none = sb.config("none.json", &B0.replace("FR", "0.0, 0.0"));
    let run = |cfg: &Path, mode: &str, name: &str| {
        let out = sb.path(name);
        sb.ok(&["thermal", "--scenario", s(cfg), "--mode", mode, "-o", s(&out)]);
        json(&out.join("ledger.json"))
    };
    let close = |v: &serde_json::Value, want: f64| (v.as_f64().unwrap() - want).abs() < 1e-9 * want.abs().max(1.0);
    let cc = run(&full, "constant-cop", "cc");
    assert!(close(&cc["delta_z"], -0.29) && close(&cc["z_tau"], 1.71));
    assert!(cc["identity_residual"].as_f64().unwrap() < 1e-9);
    let hp = run(&full, "heat-pump", "hp");
    assert!(close(&hp["delta_z"], 1.065) && close(&hp["z_tau"], 3.065));
    assert_eq!(hp["mode"], "heat-pump");
    let zero = run(&none, "constant-cop", "zero");
    assert_eq!(zero["delta_z"], 0.0);
}

#[test]
fn thermal_rejects_partial_frustration_for_heat_pump() {
    let sb = Sandbox::new();
    let cfg = sb.config("partial.json", &B0.replace("FR", "0.5, 1.0"));
    let out = sb.run(&["thermal", "-s", s(&cfg), "--mode", "heat-pump", "-o", s(&sb.path("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("full frustration"));
}

#[test]
fn regions_dump() {
    let sb = Sandbox::new();
    let cfg = sb.config(
        "regions.json",
        &format!(r#"{{ "params": {P0}, "r": {{ "min": -10.0, "max": 10.0, "n": 21 }}, "z": {{ "min": 0.0, "max": 5.0, "n": 6 }} }}"#),
    );
    let out = sb.path("out");
    sb.ok(&["regions", "-c", s(&cfg), "-o", s(&out)]);
    let g = json(&out.join("geometry.json"));
    assert_eq!(g["regions"]["ramp_up_edge"], 2.0);
    assert_eq!(g["negative_drift"]["g1"]["c"], 25.0);
    let rows = csv_rows(&out.join("regions.csv"));
    assert_eq!(rows.len(), 21 * 6);
    // every grid point outside C has drift <= -1
    for r in rows.iter().filter(|r| &r[3] == "false") {
        assert!(f(&r[4]) <= -1.0, "{r:?}");
    }
    let neg = P0.replace("0.1", "-0.1");
    let cfg = sb.config("neg.json", &format!(r#"{{ "params": {neg} }}"#));
    let out = sb.path("neg");
    sb.ok(&["regions", "-c", s(&cfg), "-o", s(&out)]);
    assert!(json(&out.join("geometry.json"))["negative_drift"].is_null());
    assert_eq!(&csv_rows(&out.join("regions.csv"))[0][3], "NA");
}
