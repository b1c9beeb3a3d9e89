//! Data behind the standard figures: leakage maps without and with
//! detuning, fidelity against gate count, and coherence time against gate
//! count.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::ValueEnum;
use geodd::analysis::{
    fit_coherence_envelope, fit_gate_error, fit_power_law, normalize_envelope, pure_coherence_time_with_error,
    FitOptions,
};
use serde_json::{json, Value};

use crate::commands::{run_scan, run_sweep, write_sweep};
use crate::config::{Format, RunConfig};
use crate::output::{ensure_dir, num, write_csv, write_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3c,
}

impl Figure {
    fn name(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3a => "fig3a",
            Figure::Fig3c => "fig3c",
        }
    }
}

const FIG3A_TAU_US: f64 = 1.0;
const FIG3A_GATES: [usize; 8] = [1, 2, 4, 8, 16, 32, 64, 128];

const FIG3C_GATES: [usize; 5] = [1, 2, 4, 8, 16];
/// Slow OU bath used when the config has none.
const FIG3C_OU_AMPLITUDE_MHZ: f64 = 0.002;
const FIG3C_OU_TAU_US: f64 = 1000.0;
const FIG3C_OU_DT_US: f64 = 1.0;
const FIG3C_TIME_POINTS: usize = 20;
const FIG3C_TIME_RANGE_MS: (f64, f64) = (0.02, 8.0);

pub fn reproduce(figure: Figure, cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("reproduce").join(figure.name()));
    ensure_dir(&dir)?;
    // the target directory is not part of the run, keep manifests comparable
    let mut cfg = cfg.clone();
    cfg.output.path = None;
    let manifest = match figure {
        Figure::Fig2a => leakage_map(&cfg, &dir, Some(0.0))?,
        Figure::Fig2b => leakage_map(&cfg, &dir, None)?,
        Figure::Fig3a => fidelity_vs_gates(&cfg, &dir)?,
        Figure::Fig3c => coherence_vs_gates(&cfg, &dir)?,
    };
    let mut manifest = manifest;
    manifest["figure"] = json!(figure.name());
    write_json(&dir.join("manifest.json"), &manifest)
}

fn leakage_map(cfg: &RunConfig, dir: &Path, detuning_khz: Option<f64>) -> Result<Value> {
    let mut cfg = cfg.clone();
    if let Some(d) = detuning_khz {
        cfg.drive.detuning_khz = d;
    }
    let r = run_sweep(&cfg)?;
    write_sweep(&dir.join("sweep.csv"), Format::Csv, &r)?;
    let means: Vec<Value> = r
        .n_gates
        .iter()
        .enumerate()
        .map(|(k, n)| json!({"n_gates": n, "mean_p_plus": r.grid_mean(k)}))
        .collect();
    Ok(json!({
        "files": ["sweep.csv"],
        "config": cfg,
        "initial_state": "bright",
        "grid_means": means,
    }))
}

fn fidelity_vs_gates(cfg: &RunConfig, dir: &Path) -> Result<Value> {
    let mut cfg = cfg.clone();
    cfg.sequence.n_gates = None;
    cfg.sequence.n_list = FIG3A_GATES.to_vec();
    cfg.sequence.tau_us = Some(cfg.sequence.tau_us.unwrap_or(FIG3A_TAU_US));
    let points = run_scan(&cfg)?;
    write_csv(
        &dir.join("fidelity.csv"),
        &["n_gates", "fidelity", "stderr"],
        points.iter().map(|p| {
            vec![
                p.n_gates.to_string(),
                num(p.stats.fidelity),
                num(p.stats.fidelity_stderr),
            ]
        }),
    )?;
    let ns: Vec<f64> = points.iter().map(|p| p.n_gates as f64).collect();
    let fs: Vec<f64> = points.iter().map(|p| p.stats.fidelity).collect();
    let fit = fit_gate_error(&ns, &fs, &FitOptions::default())?;
    Ok(json!({
        "files": ["fidelity.csv"],
        "config": cfg,
        "gate_error_fit": fit,
    }))
}

fn log_times_ms() -> Vec<f64> {
    let (lo, hi) = FIG3C_TIME_RANGE_MS;
    let ratio = (hi / lo).ln() / (FIG3C_TIME_POINTS - 1) as f64;
    (0..FIG3C_TIME_POINTS).map(|k| lo * (k as f64 * ratio).exp()).collect()
}

/// Coherence envelope `p₊ − p₋` from `|+⟩` against total free time for each
/// gate count, fitted T₂ and the pure coherence time.
fn coherence_vs_gates(cfg: &RunConfig, dir: &Path) -> Result<Value> {
    let mut cfg = cfg.clone();
    if cfg.noise.ou_amplitude_mhz == 0.0 {
        cfg.noise.ou_amplitude_mhz = FIG3C_OU_AMPLITUDE_MHZ;
        cfg.noise.ou_tau_us = FIG3C_OU_TAU_US;
        cfg.integrator.ou_dt_us = FIG3C_OU_DT_US;
    }
    cfg.sequence.initial_state = crate::config::InitialKind::Bright;
    let t1 = cfg.noise.t1_ms;
    let times = log_times_ms();

    let mut envelope_rows = Vec::new();
    let mut table_rows = Vec::new();
    let mut summary = Vec::new();
    let (mut fit_n, mut fit_pure) = (Vec::new(), Vec::new());
    for &n in &FIG3C_GATES {
        let mut c = cfg.clone();
        c.sequence.n_gates = Some(n);
        let taus: Vec<f64> = times.iter().map(|t| t * 1e3 / n as f64).collect();
        let mut amps = Vec::with_capacity(taus.len());
        for &tau in &taus {
            c.sequence.tau_us = Some(tau);
            let p = run_scan(&c)?[0];
            amps.push(p.stats.mean.plus - p.stats.mean.minus);
        }
        // the shortest sequence sets the undecayed level
        let normalized: Vec<f64> = normalize_envelope(&amps, amps[0])?
            .into_iter()
            .map(|a| a.clamp(0.0, 1.05))
            .collect();
        for (t, a) in times.iter().zip(&normalized) {
            envelope_rows.push(vec![n.to_string(), num(*t), num(*a)]);
        }
        let fit = fit_coherence_envelope(&times, &normalized, &FitOptions::default())?;
        let (t2, t2_err, p) = (fit.value("t2"), fit.stderr("t2"), fit.value("p"));
        let pure = match t1 {
            Some(t1) => pure_coherence_time_with_error(t2, t2_err, t1, 0.0).ok(),
            None => Some((t2, t2_err)),
        };
        if let Some((v, _)) = pure {
            fit_n.push(n as f64);
            fit_pure.push(v);
        }
        table_rows.push(vec![
            n.to_string(),
            num(t2),
            num(t2_err),
            num(p),
            pure.map(|x| num(x.0)).unwrap_or_default(),
            pure.map(|x| num(x.1)).unwrap_or_default(),
        ]);
        summary.push(json!({
            "n_gates": n,
            "t2_ms": t2,
            "t2_stderr_ms": t2_err,
            "p": p,
            "t2_pure_ms": pure.map(|x| x.0),
            "t2_pure_stderr_ms": pure.map(|x| x.1),
            "plateau": amps[0],
        }));
    }
    write_csv(
        &dir.join("envelope.csv"),
        &["n_gates", "time_ms", "amplitude"],
        envelope_rows,
    )?;
    write_csv(
        &dir.join("coherence.csv"),
        &[
            "n_gates",
            "t2_ms",
            "t2_stderr_ms",
            "p",
            "t2_pure_ms",
            "t2_pure_stderr_ms",
        ],
        table_rows,
    )?;
    let scaling = fit_power_law(&fit_n, &fit_pure).ok();
    Ok(json!({
        "files": ["envelope.csv", "coherence.csv"],
        "config": cfg,
        "total_times_ms": times,
        "coherence": summary,
        "pure_time_scaling": scaling,
    }))
}
