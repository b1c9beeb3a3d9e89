use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const HEADER: &str = "tau_us,n_gates,p_plus,p_zero,p_minus,fidelity,stderr";

fn geodd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodd"))
        .args(args)
        .env_remove("GEODD_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = geodd(args);
    assert!(
        out.status.success(),
        "geodd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Runs a command expected to fail; returns its single diagnostic line.
fn fails(args: &[&str]) -> String {
    let out = geodd(args);
    assert!(!out.status.success(), "geodd {args:?} unexpectedly succeeded");
    let err = String::from_utf8_lossy(&out.stderr).trim_end().to_string();
    assert_eq!(err.lines().count(), 1, "multi-line error: {err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn column(csv_text: &str, name: &str) -> Vec<f64> {
    let mut lines = csv_text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn scan(dir: &TempDir, name: &str, extra: &[&str]) -> (PathBuf, String) {
    let out = dir.path().join(name);
    let mut args = vec!["simulate", "--out", path_str(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    let text = fs::read_to_string(&out).unwrap();
    (out, text)
}

#[test]
fn default_scan_has_exact_header_rows_and_detuning() {
    let dir = TempDir::new().unwrap();
    let (csv, text) = scan(&dir, "run.csv", &["--samples", "100"]);
    assert_eq!(text.lines().next().unwrap(), HEADER);
    assert_eq!(text.lines().count() - 1, 296);

    let sidecar: Value = serde_json::from_slice(&fs::read(dir.path().join("run.config.json")).unwrap()).unwrap();
    assert_eq!(sidecar["ensemble"]["seed"], 0);
    assert_eq!(sidecar["ensemble"]["samples"], 100);

    let out = ok(&["dips", path_str(&csv)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let khz = report["estimated_detuning_khz"].as_f64().unwrap();
    assert!((khz - 130.0).abs() <= 0.02 * 130.0, "estimated {khz} kHz");

    let same = ok(&["fit", "--model", "dips", path_str(&csv)]);
    assert_eq!(same.stdout, out.stdout);
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let args = ["--samples", "20", "--sequence.tau_stop_us", "5", "--seed", "11"];
    let (_, a) = scan(&dir, "a.csv", &args);
    let (_, b) = scan(&dir, "b.csv", &args);
    assert_eq!(a, b);
    let (_, c) = scan(
        &dir,
        "c.csv",
        &["--samples", "20", "--sequence.tau_stop_us", "5", "--seed", "12"],
    );
    assert_ne!(a, c);
}

#[test]
fn sidecar_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let (_, first) = scan(
        &dir,
        "first.csv",
        &[
            "--samples",
            "15",
            "--sequence.tau_stop_us",
            "3",
            "--drive.pulse_length_error",
            "0.01",
            "--seed",
            "5",
        ],
    );
    let sidecar = dir.path().join("first.config.json");
    let again = dir.path().join("again.csv");
    ok(&["simulate", "--config", path_str(&sidecar), "--out", path_str(&again)]);
    assert_eq!(fs::read_to_string(again).unwrap(), first);
}

#[test]
fn json_output_carries_the_same_rows() {
    let dir = TempDir::new().unwrap();
    let args = ["--samples", "10", "--sequence.tau_stop_us", "2"];
    let (_, csv) = scan(&dir, "s.csv", &args);
    let mut json_args = args.to_vec();
    json_args.extend_from_slice(&["--format", "json"]);
    let (_, json) = scan(&dir, "s.json", &json_args);
    let rows = serde_json::from_str::<Value>(&json).unwrap()["rows"]
        .as_array()
        .unwrap()
        .clone();
    let fid = column(&csv, "fidelity");
    assert_eq!(rows.len(), fid.len());
    for (r, f) in rows.iter().zip(&fid) {
        assert_eq!(r["fidelity"].as_f64().unwrap(), *f);
    }
}

/// Dip positions reported by the detector for a scan file.
fn dips_in(csv: &Path) -> Vec<f64> {
    let out = ok(&["dips", path_str(csv)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    report["dip_positions_us"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

#[test]
fn removing_detuning_removes_the_first_dip() {
    // without detuning the ¹⁴N lines still leave a ~0.03 ripple with a
    // shallow minimum near 7.7 µs; the Δ dip is ten times deeper
    let dir = TempDir::new().unwrap();
    let grid = [
        "--samples",
        "200",
        "--sequence.tau_start_us",
        "5",
        "--sequence.tau_stop_us",
        "10.5",
    ];
    let (detuned, _) = scan(&dir, "d.csv", &grid);
    let mut flat = grid.to_vec();
    flat.extend_from_slice(&["--detuning-khz", "0"]);
    let (resonant, _) = scan(&dir, "r.csv", &flat);

    let near = |ds: &[f64]| ds.iter().any(|d| (d - 7.69).abs() < 0.2);
    let (with, without) = (dips_in(&detuned), dips_in(&resonant));
    assert!(near(&with), "{with:?}");
    assert!(!near(&without), "{without:?}");
}

#[test]
fn sweep_covers_the_grid_in_fixed_order() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    ok(&["sweep", "--out", path_str(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "splitting_mhz,tau_us,n_gates,p_plus");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 81 * 60 * 4);
    let key = |r: &Vec<f64>| (r[0], r[1], r[2]);
    assert!(rows.windows(2).all(|w| key(&w[0]) < key(&w[1])));
    assert_eq!(key(&rows[0]), (-4.0, 0.5, 1.0));
    assert_eq!(key(&rows[3]), (-4.0, 0.5, 8.0));
    assert_eq!(key(&rows[4]), (-4.0, 1.0, 1.0));

    let again = dir.path().join("again.csv");
    ok(&["sweep", "--out", path_str(&again)]);
    assert_eq!(fs::read_to_string(again).unwrap(), text);
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    let err = fails(&["sweep", "--out", path_str(&out), "--sweep.n_list", "[]"]);
    assert!(err.contains("sweep.n_list"), "{err}");
    assert!(!out.exists());
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn gate_error_fit_recovers_generator() {
    let dir = TempDir::new().unwrap();
    let mut body = String::from("n_gates,fidelity\n");
    for k in 0..8 {
        let n = 1u32 << k;
        body.push_str(&format!("{n},{:.17e}\n", 0.898 * 0.9997f64.powi(n as i32)));
    }
    let input = write(&dir, "f.csv", &body);
    let out = ok(&["fit", "--model", "gate-error", path_str(&input)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["converged"], true);
    let params = report["parameters"].as_array().unwrap();
    let get = |name: &str| {
        params
            .iter()
            .find(|p| p["name"] == name)
            .map(|p| (p["value"].as_f64().unwrap(), p["stderr"].as_f64().unwrap()))
            .unwrap()
    };
    assert!((get("epsilon_0").0 - 0.102).abs() < 1e-6);
    assert!((get("epsilon_gate").0 - 0.0003).abs() < 1e-6);
    assert!(get("epsilon_gate").1.is_finite());
    assert!(report["residual_norm"].as_f64().unwrap() < 1e-9);

    let file = dir.path().join("report.json");
    ok(&[
        "fit",
        "--model",
        "gate-error",
        path_str(&input),
        "--out",
        path_str(&file),
    ]);
    let saved: Value = serde_json::from_slice(&fs::read(file).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn envelope_needs_four_points() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "e.csv", "time_ms,amplitude\n0.5,0.9\n1.0,0.7\n2.0,0.4\n");
    fails(&["fit", "--model", "envelope", path_str(&input)]);
}

#[test]
fn missing_column_is_named() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "g.csv", "n_gates,contrast\n1,0.9\n2,0.8\n4,0.7\n");
    let err = fails(&["fit", "--model", "gate-error", path_str(&input)]);
    assert!(err.contains("`fidelity`"), "{err}");
    let err = fails(&["fit", "--model", "gate-error", path_str(&input), "--y", "visibility"]);
    assert!(err.contains("`visibility`"), "{err}");
}

#[test]
fn unknown_figure_lists_the_valid_ones() {
    let err = fails(&["reproduce", "fig9"]);
    for name in ["fig2a", "fig2b", "fig3a", "fig3c"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn bad_config_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.toml", "[drive]\nrabi_mhz = -3.0\n");
    let err = fails(&[
        "simulate",
        "--config",
        path_str(&cfg),
        "--out",
        path_str(&dir.path().join("x.csv")),
    ]);
    assert!(err.contains("drive.rabi_mhz"), "{err}");

    let err = fails(&["simulate", "--noise.ou_amplitude_mhz", "1", "--noise.ou_tau_us", "-1"]);
    assert!(err.contains("noise.ou_tau_us"), "{err}");

    let cfg = write(&dir, "u.toml", "[drive]\nrabi_ghz = 3.0\n");
    let err = fails(&["simulate", "--config", path_str(&cfg)]);
    assert!(err.contains("rabi_ghz"), "{err}");

    let err = fails(&["simulate", "--ensemble.samples", "0"]);
    assert!(err.contains("ensemble.samples"), "{err}");
}

#[test]
fn unwritable_output_fails() {
    let dir = TempDir::new().unwrap();
    let blocker = write(&dir, "file", "");
    let out = blocker.join("sub").join("run.csv");
    fails(&[
        "simulate",
        "--samples",
        "2",
        "--sequence.tau_stop_us",
        "1",
        "--out",
        path_str(&out),
    ]);
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn fig2b_is_deterministic_and_uses_four_gate_counts() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["reproduce", "fig2b", "--out", path_str(&a)]);
    ok(&["reproduce", "fig2b", "--out", path_str(&b)]);
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["figure"], "fig2b");
    let ns: Vec<u64> = manifest["grid_means"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["n_gates"].as_u64().unwrap())
        .collect();
    assert_eq!(ns, [1, 2, 4, 8]);
}

#[test]
fn detuning_raises_grid_means() {
    let dir = TempDir::new().unwrap();
    let means = |fig: &str| -> Vec<f64> {
        let d = dir.path().join(fig);
        ok(&["reproduce", fig, "--out", path_str(&d)]);
        let m: Value = serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap();
        m["grid_means"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v["mean_p_plus"].as_f64().unwrap())
            .collect()
    };
    let (flat, detuned) = (means("fig2a"), means("fig2b"));
    for k in 1..4 {
        assert!(detuned[k] > flat[k], "N index {k}: {} vs {}", detuned[k], flat[k]);
    }
}

#[test]
fn fig3c_table_has_pure_times_and_positive_exponent() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fig3c");
    ok(&["reproduce", "fig3c", "--samples", "40", "--out", path_str(&out)]);
    let table = fs::read_to_string(out.join("coherence.csv")).unwrap();
    assert_eq!(
        table.lines().next().unwrap(),
        "n_gates,t2_ms,t2_stderr_ms,p,t2_pure_ms,t2_pure_stderr_ms"
    );
    assert_eq!(column(&table, "n_gates"), [1.0, 2.0, 4.0, 8.0, 16.0]);
    for (t2, pure) in column(&table, "t2_ms").iter().zip(column(&table, "t2_pure_ms")) {
        // 1/T2 = 1/T2pure + 1/T1 with T1 = 2.6 ms
        assert!((1.0 / t2 - 1.0 / pure - 1.0 / 2.6).abs() < 1e-9);
    }
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let exponent = manifest["pure_time_scaling"]["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "exponent")
        .unwrap()["value"]
        .as_f64()
        .unwrap();
    assert!(exponent > 0.0, "exponent {exponent}");

    let refit = ok(&["fit", "--model", "power-law", path_str(&out.join("coherence.csv"))]);
    let report: Value = serde_json::from_slice(&refit.stdout).unwrap();
    assert_eq!(report["parameters"], manifest["pure_time_scaling"]["parameters"]);
}
