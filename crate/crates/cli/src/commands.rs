use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use geodd::analysis::{
    find_dips, fit_coherence_envelope, fit_gate_error, fit_power_law, Bootstrap, DipOptions, FitOptions, FitResult,
};
use geodd::build_dissipator;
use geodd::ensemble::{linear_grid, sweep_leakage_map, tau_scan, ScanPoint, SweepResult};
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::output::{num, sidecar_path, write_csv, write_json};
use crate::{DipArgs, Model};

pub const SIMULATE_HEADER: [&str; 7] = ["tau_us", "n_gates", "p_plus", "p_zero", "p_minus", "fidelity", "stderr"];
pub const SWEEP_HEADER: [&str; 4] = ["splitting_mhz", "tau_us", "n_gates", "p_plus"];

fn output_path(cfg: &RunConfig, default_stem: &str) -> PathBuf {
    cfg.output.path.clone().unwrap_or_else(|| {
        let ext = match cfg.output.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        PathBuf::from(format!("{default_stem}.{ext}"))
    })
}

pub fn run_scan(cfg: &RunConfig) -> Result<Vec<ScanPoint>> {
    let dissipator = build_dissipator(cfg.noise.t1_ms)?;
    let points = tau_scan(
        cfg.sequence.initial_state.state(),
        &cfg.taus()?,
        &cfg.gate_counts(),
        &cfg.drive(),
        cfg.sequence.edge_convention,
        &cfg.ensemble(),
        Some(&dissipator),
        &cfg.integrator(),
    )?;
    Ok(points)
}

#[derive(Serialize)]
struct SimRow {
    tau_us: f64,
    n_gates: usize,
    p_plus: f64,
    p_zero: f64,
    p_minus: f64,
    fidelity: f64,
    stderr: f64,
}

pub fn write_scan(path: &Path, format: Format, points: &[ScanPoint]) -> Result<()> {
    match format {
        Format::Csv => write_csv(
            path,
            &SIMULATE_HEADER,
            points.iter().map(|p| {
                vec![
                    num(p.tau_us),
                    p.n_gates.to_string(),
                    num(p.stats.mean.plus),
                    num(p.stats.mean.zero),
                    num(p.stats.mean.minus),
                    num(p.stats.fidelity),
                    num(p.stats.stderr.plus),
                ]
            }),
        ),
        Format::Json => {
            let rows: Vec<SimRow> = points
                .iter()
                .map(|p| SimRow {
                    tau_us: p.tau_us,
                    n_gates: p.n_gates,
                    p_plus: p.stats.mean.plus,
                    p_zero: p.stats.mean.zero,
                    p_minus: p.stats.mean.minus,
                    fidelity: p.stats.fidelity,
                    stderr: p.stats.stderr.plus,
                })
                .collect();
            write_json(path, &json!({ "rows": rows }))
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let path = output_path(cfg, "simulate");
    let points = run_scan(cfg)?;
    write_scan(&path, cfg.output.format, &points)?;
    write_json(&sidecar_path(&path), cfg)
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let s = &cfg.sweep;
    let splittings = linear_grid(s.splitting_start_mhz, s.splitting_stop_mhz, s.splitting_step_mhz)
        .context("sweep.splitting grid")?;
    let taus = linear_grid(s.tau_start_us, s.tau_stop_us, s.tau_step_us).context("sweep.tau grid")?;
    if s.n_list.is_empty() {
        bail!("sweep.n_list: empty grid");
    }
    Ok(sweep_leakage_map(
        &splittings,
        &taus,
        &s.n_list,
        &cfg.drive(),
        cfg.sequence.edge_convention,
    )?)
}

pub fn write_sweep(path: &Path, format: Format, r: &SweepResult) -> Result<()> {
    let mut rows = Vec::with_capacity(r.p_plus.len());
    for (i, &split) in r.splitting_mhz.iter().enumerate() {
        for (j, &tau) in r.tau_us.iter().enumerate() {
            for (k, &n) in r.n_gates.iter().enumerate() {
                rows.push((split, tau, n, r.get(i, j, k)));
            }
        }
    }
    match format {
        Format::Csv => write_csv(
            path,
            &SWEEP_HEADER,
            rows.iter()
                .map(|&(s, t, n, p)| vec![num(s), num(t), n.to_string(), num(p)]),
        ),
        Format::Json => {
            let rows: Vec<_> = rows
                .iter()
                .map(|&(s, t, n, p)| json!({"splitting_mhz": s, "tau_us": t, "n_gates": n, "p_plus": p}))
                .collect();
            write_json(path, &json!({ "rows": rows }))
        }
    }
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let path = output_path(cfg, "sweep");
    let r = run_sweep(cfg)?;
    write_sweep(&path, cfg.output.format, &r)?;
    write_json(&sidecar_path(&path), cfg)
}

/// Numeric columns of a CSV file, keyed by header name.
pub struct Table {
    path: PathBuf,
    columns: HashMap<String, Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
        let headers: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut columns: HashMap<String, Vec<f64>> = headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: bad record", path.display()))?;
            for (h, field) in headers.iter().zip(rec.iter()) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    anyhow!(
                        "{}: row {}: column `{h}` is not a number: {field:?}",
                        path.display(),
                        line + 2
                    )
                })?;
                columns.get_mut(h).expect("known header").push(v);
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
        })
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", self.path.display()))
    }
}

fn default_columns(model: Model) -> (&'static str, &'static str) {
    match model {
        Model::GateError => ("n_gates", "fidelity"),
        Model::Envelope => ("time_ms", "amplitude"),
        Model::PowerLaw => ("n_gates", "t2_pure_ms"),
        Model::Dips => ("tau_us", "fidelity"),
    }
}

fn fit_json(model: &str, r: &FitResult) -> serde_json::Value {
    json!({
        "model": model,
        "parameters": r.parameters,
        "residual_norm": r.residual_norm,
        "converged": r.converged,
        "iterations": r.iterations,
    })
}

pub fn fit_report(model: Model, args: &DipArgs) -> Result<serde_json::Value> {
    let table = Table::read(&args.input)?;
    let (dx, dy) = default_columns(model);
    let xname = args.x.as_deref().unwrap_or(dx);
    let yname = args.y.as_deref().unwrap_or(dy);
    let mut xs = table.column(xname)?.to_vec();
    let mut ys = table.column(yname)?.to_vec();
    if let Some(n) = args.select_n {
        let ns = table.column("n_gates")?;
        let keep: Vec<bool> = ns.iter().map(|v| *v == n as f64).collect();
        xs = xs.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
        ys = ys.iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| *v).collect();
    }
    let options = FitOptions {
        bootstrap: args.bootstrap.map(|resamples| Bootstrap { resamples, seed: 0 }),
    };
    Ok(match model {
        Model::GateError => fit_json("gate-error", &fit_gate_error(&xs, &ys, &options)?),
        Model::Envelope => fit_json("envelope", &fit_coherence_envelope(&xs, &ys, &options)?),
        Model::PowerLaw => fit_json("power-law", &fit_power_law(&xs, &ys)?),
        Model::Dips => {
            let rep = find_dips(
                &xs,
                &ys,
                &DipOptions {
                    prominence: args.prominence,
                    window: args.window,
                },
            )?;
            json!({
                "model": "dips",
                "dip_positions_us": rep.dip_positions,
                "mean_spacing_us": rep.mean_spacing,
                "estimated_detuning_khz": rep.estimated_detuning_khz,
            })
        }
    })
}

pub fn fit(model: Model, args: &DipArgs, out: Option<&Path>) -> Result<()> {
    let report = fit_report(model, args)?;
    match out {
        Some(p) => write_json(p, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}
