//! Decay models: gate-error fidelity, stretched-exponential envelope and the
//! log-log power law.

use crate::error::{Error, Result};

use super::fit::{fit_model, CurveModel, FitOptions, FitParameter, FitResult};

/// `F(N) = (1 − ε₀)(1 − ε_gate)^N`.
struct GateError;

impl CurveModel for GateError {
    const NAMES: &'static [&'static str] = &["epsilon_0", "epsilon_gate"];

    fn value(&self, p: &[f64], n: f64) -> f64 {
        (1.0 - p[0]) * (1.0 - p[1]).powf(n)
    }

    fn gradient(&self, p: &[f64], n: f64, out: &mut [f64]) {
        let decay = (1.0 - p[1]).powf(n);
        out[0] = -decay;
        out[1] = if n == 0.0 {
            0.0
        } else {
            -(1.0 - p[0]) * n * (1.0 - p[1]).powf(n - 1.0)
        };
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0 - 1e-12), (0.0, 1.0 - 1e-12)]
    }
}

/// `A(t) = exp(−(t/T₂)^p)`, `p ∈ [1, 4]`.
struct Envelope;

impl CurveModel for Envelope {
    const NAMES: &'static [&'static str] = &["t2", "p"];

    fn value(&self, q: &[f64], t: f64) -> f64 {
        (-(t / q[0]).powf(q[1])).exp()
    }

    fn gradient(&self, q: &[f64], t: f64, out: &mut [f64]) {
        let (t2, p) = (q[0], q[1]);
        if t <= 0.0 {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        let u = (t / t2).powf(p);
        let a = (-u).exp();
        out[0] = a * p * u / t2;
        out[1] = -a * u * (t / t2).ln();
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(1e-300, f64::INFINITY), (1.0, 4.0)]
    }
}

fn sorted_pairs(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.into_iter().unzip()
}

fn check_lengths(xs: usize, ys: usize, needed: usize) -> Result<()> {
    if xs != ys {
        return Err(Error::InvalidData(format!("{xs} abscissae but {ys} values")));
    }
    if xs < needed {
        return Err(Error::InsufficientData { needed, got: xs });
    }
    Ok(())
}

/// Weighted least squares `y = a + b x`; returns `(a, b, se_a, se_b)` with
/// the residual variance estimated from the weighted residuals.
fn weighted_regression(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64, f64) {
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let n = xs.len() as f64;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = if xs.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / sw + mx * mx / sxx)).sqrt();
    (intercept, slope, se_intercept, se_slope)
}

fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    weighted_regression(xs, ys, &vec![1.0; xs.len()])
}

/// Fits `F(N) = (1 − ε₀)(1 − ε_gate)^N` to fidelities after `N` gates.
///
/// Starting point: `ε_gate` from the slope of `ln F` against `N`, `ε₀` from
/// the fidelity at the smallest `N`. The result does not depend on the order
/// of the input pairs.
pub fn fit_gate_error(n_values: &[f64], fidelities: &[f64], options: &FitOptions) -> Result<FitResult> {
    check_lengths(n_values.len(), fidelities.len(), 3)?;
    if let Some(f) = fidelities.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidData(format!("fidelity {f} outside [0, 1]")));
    }
    if n_values.iter().any(|n| !(*n >= 0.0)) {
        return Err(Error::InvalidData("gate counts must be >= 0".into()));
    }
    let (ns, fs) = sorted_pairs(n_values, fidelities);
    if fs.iter().any(|&f| f <= 0.0) {
        return Err(Error::InvalidData(
            "fidelities must be positive for the log-slope guess".into(),
        ));
    }
    let logs: Vec<f64> = fs.iter().map(|f| f.ln()).collect();
    let distinct = ns.windows(2).any(|w| w[0] != w[1]);
    let slope = if distinct { linear_regression(&ns, &logs).1 } else { 0.0 };
    let eps_gate = (1.0 - slope.min(0.0).exp()).clamp(0.0, 0.5);
    let eps_0 = (1.0 - fs[0] / (1.0 - eps_gate).powf(ns[0])).clamp(0.0, 1.0 - 1e-12);
    Ok(fit_model(&GateError, &ns, &fs, &[eps_0, eps_gate], options))
}

/// Fidelity plateau `(1 − ε₀)(1 − ε_gate)^N` predicted by a gate-error fit.
pub fn gate_error_plateau(fit: &FitResult, n: f64) -> f64 {
    GateError.value(&[fit.value("epsilon_0"), fit.value("epsilon_gate")], n)
}

/// Fits `exp(−(t/T₂)^p)` with `p ∈ [1, 4]` to an already normalized
/// coherence envelope. Times are in ms.
///
/// Starting point: `T₂` from the first 1/e crossing (or, without one, the
/// `p = 2` estimate through the last point), `p = 2`.
pub fn fit_coherence_envelope(times_ms: &[f64], amplitudes: &[f64], options: &FitOptions) -> Result<FitResult> {
    check_lengths(times_ms.len(), amplitudes.len(), 4)?;
    if let Some(a) = amplitudes.iter().find(|a| !(0.0..=1.05).contains(*a)) {
        return Err(Error::InvalidData(format!("amplitude {a} outside [0, 1.05]")));
    }
    if amplitudes.iter().all(|&a| a == 0.0) {
        return Err(Error::InvalidData("all amplitudes are zero".into()));
    }
    if times_ms.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidData("times must be >= 0".into()));
    }
    let (ts, amps) = sorted_pairs(times_ms, amplitudes);
    let t2_guess = initial_t2(&ts, &amps);
    Ok(fit_model(&Envelope, &ts, &amps, &[t2_guess, 2.0], options))
}

fn initial_t2(ts: &[f64], amps: &[f64]) -> f64 {
    let level = (-1.0f64).exp();
    for k in 1..ts.len() {
        let (a0, a1) = (amps[k - 1], amps[k]);
        if a0 >= level && a1 < level {
            let frac = (a0 - level) / (a0 - a1);
            return ts[k - 1] + frac * (ts[k] - ts[k - 1]);
        }
    }
    let last = ts.len() - 1;
    let t_last = ts[last].max(f64::MIN_POSITIVE);
    let a = amps[last].clamp(1e-12, 1.0 - 1e-12);
    if amps[last] < level {
        // decayed before the first sample
        let a0 = amps[0].clamp(1e-12, 1.0 - 1e-12);
        return ts[0].max(1e-12) / (-a0.ln()).sqrt();
    }
    t_last / (-a.ln()).sqrt()
}

/// Fits `T ∝ N^k` by least squares in log-log space.
///
/// Points are weighted by `T²`: equal absolute noise on the values becomes
/// noise of size `σ/T` on `ln T`, so unweighted log-space errors would be
/// misstated.
pub fn fit_power_law(n_values: &[f64], values: &[f64]) -> Result<FitResult> {
    check_lengths(n_values.len(), values.len(), 3)?;
    if n_values.iter().chain(values).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidData("power-law inputs must be positive".into()));
    }
    let (ns, vs) = sorted_pairs(n_values, values);
    let lx: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ly: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    if lx.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::InvalidData("need at least two distinct gate counts".into()));
    }
    let ws: Vec<f64> = vs.iter().map(|v| v * v).collect();
    let (a, b, se_a, se_b) = weighted_regression(&lx, &ly, &ws);
    let prefactor = a.exp();
    let residual_norm = ns
        .iter()
        .zip(&vs)
        .map(|(n, v)| (v - prefactor * n.powf(b)).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        parameters: vec![
            FitParameter {
                name: "exponent",
                value: b,
                stderr: se_b,
            },
            FitParameter {
                name: "prefactor",
                value: prefactor,
                stderr: prefactor * se_a,
            },
        ],
        residual_norm,
        converged: true,
        iterations: 1,
    })
}
