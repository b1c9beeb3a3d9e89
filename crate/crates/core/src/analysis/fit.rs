//! Bounded Levenberg–Marquardt for the small curve models used here.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitParameter {
    pub name: &'static str,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub parameters: Vec<FitParameter>,
    /// `‖y − f(x)‖₂`.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Value of a named parameter. Panics on an unknown name.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("no fit parameter `{name}`"))
            .value
    }

    pub fn stderr(&self, name: &str) -> f64 {
        self.get(name)
            .unwrap_or_else(|| panic!("no fit parameter `{name}`"))
            .stderr
    }
}

/// Residual bootstrap for the standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FitOptions {
    pub bootstrap: Option<Bootstrap>,
}

/// A model `y = f(θ, x)` with an analytic Jacobian and box bounds.
pub(crate) trait CurveModel {
    const NAMES: &'static [&'static str];

    fn value(&self, params: &[f64], x: f64) -> f64;
    fn gradient(&self, params: &[f64], x: f64, out: &mut [f64]);
    fn bounds(&self) -> Vec<(f64, f64)>;
}

const MAX_ITERATIONS: usize = 500;

fn cost<M: CurveModel>(model: &M, params: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (y - model.value(params, x)).powi(2))
        .sum()
}

fn clamp(params: &mut [f64], bounds: &[(f64, f64)]) {
    for (p, (lo, hi)) in params.iter_mut().zip(bounds) {
        *p = p.clamp(*lo, *hi);
    }
}

fn jacobian<M: CurveModel>(model: &M, params: &[f64], xs: &[f64]) -> DMatrix<f64> {
    let k = params.len();
    let mut j = DMatrix::zeros(xs.len(), k);
    let mut row = vec![0.0; k];
    for (i, &x) in xs.iter().enumerate() {
        model.gradient(params, x, &mut row);
        for c in 0..k {
            j[(i, c)] = row[c];
        }
    }
    j
}

struct Solution {
    params: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

fn levenberg_marquardt<M: CurveModel>(model: &M, xs: &[f64], ys: &[f64], start: &[f64]) -> Solution {
    let bounds = model.bounds();
    let mut params = start.to_vec();
    clamp(&mut params, &bounds);
    let mut current = cost(model, &params, xs, ys);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if current == 0.0 {
            converged = true;
            break;
        }
        let j = jacobian(model, &params, xs);
        let r = DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| y - model.value(&params, x)));
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            clamp(&mut trial, &bounds);
            let trial_cost = cost(model, &trial, xs, ys);
            if trial_cost <= current {
                let moved = trial
                    .iter()
                    .zip(&params)
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1e-12))
                    .fold(0.0f64, f64::max);
                let improvement = current - trial_cost;
                params = trial;
                current = trial_cost;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                if moved < 1e-14 || improvement <= 1e-30 * current.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: at a (possibly bounded) minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Solution {
        params,
        cost: current,
        converged,
        iterations,
    }
}

/// Residual-scaled covariance `s² (JᵀJ)⁻¹` with `s² = RSS/(m − k)`.
fn covariance_errors<M: CurveModel>(model: &M, params: &[f64], xs: &[f64], rss: f64) -> Vec<f64> {
    let k = params.len();
    let dof = xs.len().saturating_sub(k).max(1) as f64;
    let j = jacobian(model, params, xs);
    let jtj = j.transpose() * &j;
    match jtj.try_inverse() {
        Some(inv) => (0..k).map(|d| (inv[(d, d)] * rss / dof).max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; k],
    }
}

pub(crate) fn fit_model<M: CurveModel>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    start: &[f64],
    options: &FitOptions,
) -> FitResult {
    let sol = levenberg_marquardt(model, xs, ys, start);
    let errors = match options.bootstrap {
        None => covariance_errors(model, &sol.params, xs, sol.cost),
        Some(b) => bootstrap_errors(model, xs, ys, &sol.params, b),
    };
    FitResult {
        parameters: M::NAMES
            .iter()
            .zip(sol.params.iter().zip(errors))
            .map(|(&name, (&value, stderr))| FitParameter { name, value, stderr })
            .collect(),
        residual_norm: sol.cost.sqrt(),
        converged: sol.converged,
        iterations: sol.iterations,
    }
}

fn bootstrap_errors<M: CurveModel>(model: &M, xs: &[f64], ys: &[f64], best: &[f64], b: Bootstrap) -> Vec<f64> {
    let fitted: Vec<f64> = xs.iter().map(|&x| model.value(best, x)).collect();
    let residuals: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(b.seed);
    let k = best.len();
    let mut sums = vec![0.0; k];
    let mut sq = vec![0.0; k];
    let n = b.resamples.max(2);
    for _ in 0..n {
        let resampled: Vec<f64> = fitted
            .iter()
            .map(|f| f + residuals[rng.random_range(0..residuals.len())])
            .collect();
        let sol = levenberg_marquardt(model, xs, &resampled, best);
        for d in 0..k {
            sums[d] += sol.params[d];
            sq[d] += sol.params[d] * sol.params[d];
        }
    }
    (0..k)
        .map(|d| {
            let mean = sums[d] / n as f64;
            ((sq[d] / n as f64 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64).sqrt()
        })
        .collect()
}
