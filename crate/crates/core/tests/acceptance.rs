//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints its own PASS/FAIL line; exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use geodd::analysis::{
    find_dips, fit_coherence_envelope, fit_gate_error, fit_power_law, measure_dip, pure_coherence_time, DipOptions,
    FitOptions, FitResult,
};
use geodd::ensemble::{linear_grid, run_ensemble, sweep_leakage_map, tau_scan, EnsembleSpec};
use geodd::{
    build_dd_sequence, build_dissipator, propagate_sequence, BathRealization, DriveParams, EdgeConvention,
    IntegratorSettings, NoiseModel, StateVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const HALF: EdgeConvention = EdgeConvention::HalfInterval;

fn reference_noise() -> NoiseModel {
    NoiseModel {
        c13_width_1e_mhz: 0.3,
        n14_splitting_mhz: 2.2,
        ..NoiseModel::noiseless()
    }
}

fn drive(detuning_khz: f64) -> DriveParams {
    DriveParams::ideal(25.0).with_detuning(detuning_khz)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_rel(x: f64, target: f64, tol: f64) -> bool {
    ((x - target) / target).abs() <= tol
}

fn resonance_dips() -> Outcome {
    let taus = linear_grid(0.5, 30.0, 0.1).unwrap();
    let spec = EnsembleSpec::new(2000, 0, reference_noise());
    let scan = tau_scan(
        StateVector::bright(),
        &taus,
        &[8],
        &drive(130.0),
        HALF,
        &spec,
        None,
        &IntegratorSettings::default(),
    )
    .map_err(|e| e.to_string())?;
    let fid: Vec<f64> = scan.iter().map(|p| p.stats.fidelity).collect();
    let rep = find_dips(&taus, &fid, &DipOptions::default()).map_err(|e| e.to_string())?;
    let d = &rep.dip_positions;
    let ok = d.len() >= 2 && within_rel(d[0], 7.69, 0.02) && within_rel(d[1], 15.38, 0.02);
    check(ok, format!("dips at {d:.3?} µs (targets 7.69, 15.38 ± 2%)"))
}

fn detuning_suppression() -> Outcome {
    let n_list = [1, 2, 4, 8];
    let single = |det: f64| -> Result<f64, String> {
        let seq = build_dd_sequence(8, 4.0, &drive(det), HALF).map_err(|e| e.to_string())?;
        propagate_sequence(
            StateVector::bright(),
            &seq,
            &BathRealization::fixed(0.3),
            None,
            &IntegratorSettings::default(),
        )
        .map(|r| r.populations.plus)
        .map_err(|e| e.to_string())
    };
    let (p0, p130) = (single(0.0)?, single(130.0)?);
    let splits = linear_grid(-4.0, 4.0, 0.1).unwrap();
    let taus = linear_grid(0.5, 30.0, 0.5).unwrap();
    let without = sweep_leakage_map(&splits, &taus, &n_list, &drive(0.0), HALF).map_err(|e| e.to_string())?;
    let with = sweep_leakage_map(&splits, &taus, &n_list, &drive(130.0), HALF).map_err(|e| e.to_string())?;
    let means: Vec<(f64, f64)> = (0..n_list.len())
        .map(|k| (without.grid_mean(k), with.grid_mean(k)))
        .collect();
    let ok = p130 > p0 && means[1..].iter().all(|(a, b)| b > a);
    check(
        ok,
        format!(
            "p_plus(δ=0.3, τ=4, N=8): {p0:.5} → {p130:.5}; grid means N=2,4,8: {}",
            means[1..]
                .iter()
                .map(|(a, b)| format!("{a:.4}→{b:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    fit_power_law(xs, ys).unwrap().value("exponent")
}

fn error_scaling() -> Outcome {
    let d = drive(0.0);
    let ratios: Vec<f64> = (0..10).map(|k| 1e-3 * 10f64.powf(k as f64 / 9.0)).collect();
    let mut one = Vec::new();
    let mut two = Vec::new();
    for r in &ratios {
        let bath = BathRealization::fixed(r * d.rabi_mhz);
        for (n, out) in [(1, &mut one), (2, &mut two)] {
            let seq = build_dd_sequence(n, 0.0, &d, HALF).unwrap();
            let res = propagate_sequence(
                StateVector::plus_one(),
                &seq,
                &bath,
                None,
                &IntegratorSettings::default(),
            )
            .map_err(|e| e.to_string())?;
            out.push(res.populations.zero);
        }
    }
    let (s1, s2) = (log_slope(&ratios, &one), log_slope(&ratios, &two));
    check(
        (s1 - 2.0).abs() <= 0.2 && (s2 - 4.0).abs() <= 0.3,
        format!("slopes {s1:.3} (one gate, 2.0 ± 0.2), {s2:.3} (two gates, 4.0 ± 0.3)"),
    )
}

fn angle_error_law() -> Outcome {
    let eps = 0.01;
    let mut worst = 0.0f64;
    for n in 1..=16 {
        let d = drive(0.0).with_pulse_length_error(eps);
        let seq = build_dd_sequence(n, 1.0, &d, HALF).unwrap();
        let r = propagate_sequence(
            StateVector::bright(),
            &seq,
            &BathRealization::fixed(0.0),
            None,
            &IntegratorSettings::default(),
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((r.populations.zero - (n as f64 * eps * PI).sin().powi(2)).abs());
    }
    let bound = 4.0 * (eps * PI).sin().powi(2);
    let mut peak = 0.0f64;
    for n in 1..=64 {
        let d = drive(130.0).with_pulse_length_error(eps);
        let seq = build_dd_sequence(n, 3.85, &d, HALF).unwrap();
        let r = propagate_sequence(
            StateVector::bright(),
            &seq,
            &BathRealization::fixed(0.0),
            None,
            &IntegratorSettings::default(),
        )
        .map_err(|e| e.to_string())?;
        peak = peak.max(r.populations.zero);
    }
    check(
        worst <= 0.01 && peak < bound,
        format!("max |p0 − sin²(Nεπ)| = {worst:.2e} (≤ 0.01); half-resonant max p0 = {peak:.2e} < {bound:.2e}"),
    )
}

fn relaxation_closure() -> Outcome {
    let dissipator = build_dissipator(Some(2.6)).map_err(|e| e.to_string())?;
    let d = drive(130.0);
    let n = 16;
    let times: Vec<f64> = (1..=16).map(|k| 0.5 * k as f64).collect();
    let mut amps = Vec::new();
    let mut drift = 0.0f64;
    for t in &times {
        let seq = build_dd_sequence(n, t * 1e3 / n as f64, &d, HALF).unwrap();
        let r = propagate_sequence(
            StateVector::bright(),
            &seq,
            &BathRealization::fixed(0.0),
            Some(&dissipator),
            &IntegratorSettings::default(),
        )
        .map_err(|e| e.to_string())?;
        drift = drift.max(r.trace_drift);
        amps.push(r.populations.plus - r.populations.minus);
    }
    let fit = fit_coherence_envelope(&times, &amps, &FitOptions::default()).map_err(|e| e.to_string())?;
    let t2 = fit.value("t2");
    let pure = pure_coherence_time(1.9, 2.6).map_err(|e| e.to_string())?;
    let pole = pure_coherence_time(2.6, 2.6).is_err() && pure_coherence_time(3.0, 2.6).is_err();
    check(
        within_rel(t2, 2.6, 0.10) && format!("{pure:.2}") == "7.06" && pole,
        format!(
            "fitted T2 = {t2:.4} ms (p = {:.3}); T2pure(1.9, 2.6) = {pure:.4} ms; t2 ≥ t1 rejected: {pole}; trace drift {drift:.1e}",
            fit.value("p")
        ),
    )
}

fn covers(fit: &FitResult, truth: &[(&str, f64)]) -> bool {
    truth
        .iter()
        .all(|(name, v)| (fit.value(name) - v).abs() <= 3.0 * fit.stderr(name))
}

fn fit_recovery() -> Outcome {
    // 16 gate counts over 1..128: with only 8 the joint 3σ coverage of an
    // exact estimator is ~96%, too close to the 95/100 bar to be a stable test
    let ns: Vec<f64> = (0..16).map(|k| 1.0 + 127.0 * k as f64 / 15.0).map(f64::round).collect();
    let gate = |n: f64| 0.898 * 0.9997f64.powf(n);
    let ts: Vec<f64> = (0..20).map(|k| 0.1 + 0.25 * k as f64).collect();
    let env = |t: f64, p: f64| (-(t / 1.9f64).powf(p)).exp();
    let pl_n: Vec<f64> = (0..8).map(|k| (1u32 << k) as f64).collect();
    let pl = |n: f64| 7.06 * n;

    let mut worst = 0.0f64;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let fs: Vec<f64> = ns.iter().map(|&n| gate(n)).collect();
    let f = fit_gate_error(&ns, &fs, &FitOptions::default()).map_err(|e| e.to_string())?;
    worst = worst
        .max(rel(f.value("epsilon_0"), 0.102))
        .max(rel(f.value("epsilon_gate"), 0.0003));
    for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
        let a: Vec<f64> = ts.iter().map(|&t| env(t, p)).collect();
        let f = fit_coherence_envelope(&ts, &a, &FitOptions::default()).map_err(|e| e.to_string())?;
        worst = worst.max(rel(f.value("t2"), 1.9)).max(rel(f.value("p"), p));
    }
    let v: Vec<f64> = pl_n.iter().map(|&n| pl(n)).collect();
    let f = fit_power_law(&pl_n, &v).map_err(|e| e.to_string())?;
    worst = worst
        .max(rel(f.value("exponent"), 1.0))
        .max(rel(f.value("prefactor"), 7.06));

    let noise = Normal::new(0.0, 0.005).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hits = [0usize; 3];
    for _ in 0..100 {
        let fs: Vec<f64> = ns.iter().map(|&n| gate(n) + noise.sample(&mut rng)).collect();
        let f = fit_gate_error(&ns, &fs, &FitOptions::default()).map_err(|e| e.to_string())?;
        hits[0] += covers(&f, &[("epsilon_0", 0.102), ("epsilon_gate", 0.0003)]) as usize;
        let a: Vec<f64> = ts
            .iter()
            .map(|&t| (env(t, 2.0) + noise.sample(&mut rng)).clamp(0.0, 1.05))
            .collect();
        let f = fit_coherence_envelope(&ts, &a, &FitOptions::default()).map_err(|e| e.to_string())?;
        hits[1] += covers(&f, &[("t2", 1.9), ("p", 2.0)]) as usize;
        let v: Vec<f64> = pl_n.iter().map(|&n| pl(n) + noise.sample(&mut rng)).collect();
        let f = fit_power_law(&pl_n, &v).map_err(|e| e.to_string())?;
        hits[2] += covers(&f, &[("exponent", 1.0), ("prefactor", 7.06)]) as usize;
    }
    check(
        worst <= 1e-6 && hits.iter().all(|&h| h >= 95),
        format!("worst noiseless relative error {worst:.1e}; 3σ coverage gate/envelope/power = {hits:?} of 100"),
    )
}

fn dip_narrowing() -> Outcome {
    let taus = linear_grid(4.0, 12.0, 0.02).unwrap();
    let spec = EnsembleSpec::new(2000, 0, reference_noise());
    let mut widths = Vec::new();
    for n in [2, 4, 8] {
        let scan = tau_scan(
            StateVector::bright(),
            &taus,
            &[n],
            &drive(130.0),
            HALF,
            &spec,
            None,
            &IntegratorSettings::default(),
        )
        .map_err(|e| e.to_string())?;
        let fid: Vec<f64> = scan.iter().map(|p| p.stats.fidelity).collect();
        let shape = measure_dip(&taus, &fid, 7.69, 1.5).map_err(|e| e.to_string())?;
        widths.push(shape.width);
    }
    check(
        widths[0] > widths[1] && widths[1] > widths[2],
        format!("first-dip widths N=2,4,8: {widths:.3?} µs"),
    )
}

fn scan_csv(seed: u64) -> Vec<u8> {
    let spec = EnsembleSpec::new(200, seed, reference_noise());
    let taus = linear_grid(0.5, 10.0, 0.5).unwrap();
    let scan = tau_scan(
        StateVector::bright(),
        &taus,
        &[8],
        &drive(130.0),
        HALF,
        &spec,
        None,
        &IntegratorSettings::default(),
    )
    .unwrap();
    let mut out = String::from("tau_us,n_gates,p_plus,p_zero,p_minus,fidelity,stderr\n");
    for p in scan {
        let m = p.stats.mean;
        out += &format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            p.tau_us, p.n_gates, m.plus, m.zero, m.minus, p.stats.fidelity, p.stats.stderr.plus
        );
    }
    out.into_bytes()
}

fn determinism_and_numerics() -> Outcome {
    let identical = scan_csv(7) == scan_csv(7) && scan_csv(7) != scan_csv(8);

    let d = drive(130.0).with_pulse_length_error(0.01);
    let seq = build_dd_sequence(128, 3.3, &d, HALF).unwrap();
    let bath = BathRealization::fixed(0.37);
    let norm_drift = propagate_sequence(StateVector::bright(), &seq, &bath, None, &IntegratorSettings::default())
        .map_err(|e| e.to_string())?
        .trace_drift;

    let dissipator = build_dissipator(Some(2.6)).map_err(|e| e.to_string())?;
    let long = build_dd_sequence(64, 40.0, &d, HALF).unwrap();
    let r = propagate_sequence(
        StateVector::bright(),
        &long,
        &bath,
        Some(&dissipator),
        &IntegratorSettings::default(),
    )
    .map_err(|e| e.to_string())?;
    let trace_drift = r.trace_drift;
    let span_ms = r.total_time * 1e-3;

    let short = build_dd_sequence(8, 4.0, &d, HALF).unwrap();
    let base = IntegratorSettings::default();
    let run = |s: &IntegratorSettings| {
        propagate_sequence(
            StateVector::bright(),
            &short,
            &BathRealization::fixed(0.3),
            Some(&dissipator),
            s,
        )
        .map(|r| r.populations)
        .map_err(|e| e.to_string())
    };
    let (a, b) = (run(&base)?, run(&base.halved())?);
    let halving = (a.plus - b.plus)
        .abs()
        .max((a.zero - b.zero).abs())
        .max((a.minus - b.minus).abs());

    // ensemble with OU noise and T1 stays within the same drift budget
    let ou = NoiseModel {
        ou_amplitude_mhz: 0.05,
        ou_correlation_time_us: 100.0,
        ..reference_noise()
    };
    let stats = run_ensemble(
        StateVector::bright(),
        &long,
        &EnsembleSpec::new(4, 1, ou),
        Some(&dissipator),
        &base,
    );
    let ou_ok = stats.is_ok();

    check(
        identical && norm_drift < 1e-9 && trace_drift < 1e-6 && span_ms >= 2.0 && halving < 1e-6 && ou_ok,
        format!(
            "byte-identical CSV: {identical}; unitary norm drift (N=128) {norm_drift:.1e}; \
             Lindblad trace drift over {span_ms:.2} ms {trace_drift:.1e}; dt-halving change {halving:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 resonance dips", resonance_dips),
        ("2 detuning suppression", detuning_suppression),
        ("3 error-scaling exponents", error_scaling),
        ("4 angle-error law", angle_error_law),
        ("5 relaxation closure", relaxation_closure),
        ("6 fit recovery", fit_recovery),
        ("7 dip narrowing", dip_narrowing),
        ("8 determinism and numerics", determinism_and_numerics),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1} s) {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
