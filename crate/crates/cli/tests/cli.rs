use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quench-bench")).args(args).env_remove("QUENCH_BENCH_THREADS").output().expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = bench(&full);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), v)
}

#[test]
fn shots_prints_sixteen_hundred() {
    let out = bench(&["estimate", "shots", "--p", "0.5", "--alpha", "0.05"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("1600"));
    let (code, v) = json(&["estimate", "shots", "--p", "0.5", "--alpha", "0.05", "--register", "15x15"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["m_usable"], 1600);
    for key in ["p_defect_free", "n_attempts", "wall_seconds", "energy_kwh"] {
        assert!(v["result"].get(key).is_some(), "{key}");
    }
}

#[test]
fn qpu_fifteen_by_fifteen() {
    let (code, v) = json(&["estimate", "qpu", "--register", "15x15"]);
    assert_eq!(code, 0);
    let s = &v["result"][0];
    let hours = s["budget"]["wall_seconds"].as_f64().unwrap() / 3600.0;
    let kwh = s["energy_kwh"].as_f64().unwrap();
    assert!((hours / 6.3 - 1.0).abs() <= 0.25, "{hours} h");
    assert!((kwh / 20.0 - 1.0).abs() <= 0.25, "{kwh} kWh");
}

#[test]
fn exact_at_zero_time_has_one_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, v) = json(&["simulate", "exact", "--lattice", "2x2", "--t-pulse", "0ns", "--out", out]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["n_snapshots"], 1);
    assert_eq!(v["result"]["verdict"]["passed"], true);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn tdvp_writes_timing_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, v) = json(&["simulate", "tdvp", "--lattice", "3x2", "--t-pulse", "20ns", "--chi", "8", "--out", out]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["verdict"]["passed"], true);
    let samples = quench_core::costfit::read_timing_csv(std::fs::File::open(dir.path().join("timing.csv")).unwrap()).unwrap();
    assert_eq!(samples.len(), 20);
    assert!(samples.iter().all(|s| s.n == 6 && s.chi == 8 && s.dt_ns == 1.0));
}

#[test]
fn memory_budget_refusal_exit_code() {
    let (code, v) = json(&["simulate", "tdvp", "--memory-budget-gb", "0.001"]);
    assert_eq!(code, 5);
    assert_eq!(v["error"]["code"], "MemoryBudgetExceeded");
}

#[test]
fn crossover_with_zero_model_is_none() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("zero.json");
    std::fs::write(
        &model,
        r#"{"method":"MPS","a":0.0,"b":0.0,"c":0.0,"fit_residual":0.0,
            "domain":{"n_min":9,"n_max":36,"chi_min":8,"chi_max":64},"n_samples":0}"#,
    )
    .unwrap();
    let (code, v) = json(&["estimate", "crossover", "--model", model.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(v["result"]["n_star_time"].is_null());
    assert!(v["result"]["n_star_energy"].is_null());
    let text = bench(&["estimate", "crossover", "--model", model.to_str().unwrap()]);
    assert!(String::from_utf8(text.stdout).unwrap().contains("NONE"));
}

#[test]
fn short_timing_file_is_underdetermined() {
    let dir = tempfile::tempdir().unwrap();
    let timing = dir.path().join("t.csv");
    std::fs::write(&timing, "N,chi,dt_ns,seconds_per_step,hardware_tag,n_workers\n9,8,1,0.01,cpu,1\n16,8,1,0.02,cpu,1\n").unwrap();
    let (code, v) = json(&["fit", "mps", "--timing", timing.to_str().unwrap()]);
    assert_eq!(code, 8);
    assert_eq!(v["error"]["code"], "UnderdeterminedFit");
    let (code, _) = json(&["estimate", "classical", "--timing", timing.to_str().unwrap(), "--size", "15x15"]);
    assert_eq!(code, 8);
}

#[test]
fn fit_then_extrapolate() {
    let dir = tempfile::tempdir().unwrap();
    let timing = dir.path().join("t.csv");
    let mut text = String::from("N,chi,dt_ns,seconds_per_step,hardware_tag,n_workers\n");
    for n in [9usize, 16, 25, 36] {
        for chi in [8usize, 16, 32] {
            let t = 1e-3 + 1e-9 * (n as f64).powf(1.5) * (chi as f64).powi(3) + 1e-8 * (n * n * chi * chi) as f64;
            text.push_str(&format!("{n},{chi},1,{t},cpu,1\n"));
        }
    }
    std::fs::write(&timing, text).unwrap();
    let out = dir.path().join("fit");
    let (code, v) = json(&["fit", "mps", "--timing", timing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((v["result"]["b"].as_f64().unwrap() / 1e-9 - 1.0).abs() < 1e-6);
    let model = out.join("model.json");
    let (code, v) = json(&["estimate", "classical", "--model", model.to_str().unwrap(), "--size", "15x15,20x20", "--chi", "1000"]);
    assert_eq!(code, 0);
    let reports = v["result"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["n_steps"], 4000);
    assert_eq!(reports[0]["in_domain"], false);
}

#[test]
fn rearrange_edge_cases() {
    let (_, v) = json(&["rearrange", "--perfect", "--trials", "200", "--register", "30"]);
    assert_eq!(v["result"][0]["p_hat"], 1.0);
    assert_eq!(v["result"][0]["analytic"], 1.0);
    let (_, v) = json(&["rearrange", "--fill-p", "0", "--trials", "50", "--register", "30"]);
    assert_eq!(v["result"][0]["p_hat"], 0.0);
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = bench(&["rearrange", "--trials", "500", "--register", "40", "--seed", "11", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
        let out = bench(&["simulate", "exact", "--lattice", "2x2", "--t-pulse", "10ns", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success());
    }
    for name in ["rearrange.json", "trajectory.csv", "verdict.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[lattice]\nLx = 2\nLy = 2\n[quench]\nt_pulse_ns = 5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let (_, v) = json(&["--config", c, "simulate", "exact"]);
    assert_eq!(v["result"]["n_sites"], 4);
    assert_eq!(v["result"]["n_snapshots"], 6);
    assert_eq!(v["manifest"]["inputs"].as_array().unwrap().len(), 1);
    let (_, v) = json(&["--config", c, "simulate", "exact", "--lattice", "3x2"]);
    assert_eq!(v["result"]["n_sites"], 6);
    assert_eq!(v["manifest"]["config"]["lattice"]["Lx"], 3);

    std::fs::write(&cfg, "[lattice]\nbogus = 1\n").unwrap();
    let (code, v) = json(&["--config", c, "simulate", "exact"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["code"], "Config");
}
