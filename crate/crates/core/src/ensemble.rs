//! Monte Carlo averaging over bath realizations and deterministic parameter
//! sweeps.
//!
//! Realization `i` of an ensemble always uses the seed
//! [`realization_seed`]`(master_seed, i)`, and results are accumulated in
//! index order, so parallel execution is bit-reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::qutrit::{Populations, StateVector};
use crate::sequence::{
    build_dd_sequence, propagate_sequence, DDSequence, EdgeConvention, InitialState, IntegratorSettings,
    SimulationResult,
};
use crate::spin_model::{ou_trajectory, sample_bath_realization, BathRealization, Dissipator, DriveParams, NoiseModel};

/// Samples needed for a standard error below ~1% on populations.
pub const DEFAULT_SAMPLE_COUNT: usize = 2000;
pub const DEFAULT_OU_DT_US: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub sample_count: usize,
    pub master_seed: u64,
    pub noise: NoiseModel,
    /// Sampling step of OU splitting paths, µs.
    pub ou_dt_us: f64,
}

impl EnsembleSpec {
    pub fn new(sample_count: usize, master_seed: u64, noise: NoiseModel) -> Self {
        Self {
            sample_count,
            master_seed,
            noise,
            ou_dt_us: DEFAULT_OU_DT_US,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(invalid("samples", "need at least one realization"));
        }
        if !(self.ou_dt_us > 0.0) {
            return Err(invalid("ou_dt_us", "must be > 0"));
        }
        self.noise.validate()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed of realization `index`.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Bath realization `index` of the ensemble, including an OU path long
/// enough for `duration` µs when the noise model has one.
pub fn realization(spec: &EnsembleSpec, index: u64, duration: f64) -> Result<BathRealization> {
    let seed = realization_seed(spec.master_seed, index);
    let bath = sample_bath_realization(&spec.noise, seed);
    if spec.noise.has_ou() {
        let path = ou_trajectory(&spec.noise, duration, spec.ou_dt_us, splitmix64(seed))?;
        Ok(bath.with_ou(path))
    } else {
        Ok(bath)
    }
}

/// Means and standard errors of the per-realization observables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub mean: Populations,
    pub fidelity: f64,
    pub stderr: Populations,
    pub fidelity_stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub populations: Populations,
    pub fidelity: f64,
}

impl From<&SimulationResult> for Outcome {
    fn from(r: &SimulationResult) -> Self {
        Self {
            populations: r.populations,
            fidelity: r.fidelity,
        }
    }
}

/// Collects outcomes by realization index; the summary is independent of
/// insertion order.
#[derive(Clone, Debug)]
pub struct Accumulator {
    slots: Vec<Option<Outcome>>,
}

impl Accumulator {
    pub fn new(n: usize) -> Self {
        Self { slots: vec![None; n] }
    }

    pub fn insert(&mut self, index: usize, outcome: Outcome) {
        self.slots[index] = Some(outcome);
    }

    pub fn finish(&self) -> EnsembleStats {
        let values: Vec<Outcome> = self
            .slots
            .iter()
            .map(|s| s.expect("every realization recorded"))
            .collect();
        let n = values.len();
        let columns: [Vec<f64>; 4] = [
            values.iter().map(|o| o.populations.plus).collect(),
            values.iter().map(|o| o.populations.zero).collect(),
            values.iter().map(|o| o.populations.minus).collect(),
            values.iter().map(|o| o.fidelity).collect(),
        ];
        let stats: Vec<(f64, f64)> = columns.iter().map(|c| mean_stderr(c)).collect();
        EnsembleStats {
            mean: Populations {
                plus: stats[0].0,
                zero: stats[1].0,
                minus: stats[2].0,
            },
            fidelity: stats[3].0,
            stderr: Populations {
                plus: stats[0].1,
                zero: stats[1].1,
                minus: stats[2].1,
            },
            fidelity_stderr: stats[3].1,
            samples: n,
        }
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn single_stats(r: &SimulationResult) -> EnsembleStats {
    EnsembleStats {
        mean: r.populations,
        fidelity: r.fidelity,
        stderr: Populations {
            plus: 0.0,
            zero: 0.0,
            minus: 0.0,
        },
        fidelity_stderr: 0.0,
        samples: 1,
    }
}

/// Averages [`propagate_sequence`] over `spec.sample_count` bath realizations.
pub fn run_ensemble(
    initial: impl Into<InitialState>,
    seq: &DDSequence,
    spec: &EnsembleSpec,
    dissipator: Option<&Dissipator>,
    settings: &IntegratorSettings,
) -> Result<EnsembleStats> {
    spec.validate()?;
    let initial = initial.into();
    if spec.noise.is_static_noiseless() {
        let r = propagate_sequence(initial, seq, &BathRealization::fixed(0.0), dissipator, settings)?;
        return Ok(EnsembleStats {
            samples: spec.sample_count,
            ..single_stats(&r)
        });
    }
    let duration = seq.total_duration();
    let outcomes: Vec<Result<Outcome>> = (0..spec.sample_count)
        .into_par_iter()
        .map(|i| {
            let bath = realization(spec, i as u64, duration)?;
            propagate_sequence(initial, seq, &bath, dissipator, settings).map(|r| Outcome::from(&r))
        })
        .collect();
    let mut acc = Accumulator::new(spec.sample_count);
    for (i, o) in outcomes.into_iter().enumerate() {
        acc.insert(i, o?);
    }
    Ok(acc.finish())
}

/// One point of a τ scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub tau_us: f64,
    pub n_gates: usize,
    pub stats: EnsembleStats,
}

/// Ensemble average over a grid of intervals for each gate count; rows are
/// ordered τ-major, then N.
#[allow(clippy::too_many_arguments)]
pub fn tau_scan(
    initial: impl Into<InitialState>,
    taus: &[f64],
    n_list: &[usize],
    drive: &DriveParams,
    edge: EdgeConvention,
    spec: &EnsembleSpec,
    dissipator: Option<&Dissipator>,
    settings: &IntegratorSettings,
) -> Result<Vec<ScanPoint>> {
    let initial = initial.into();
    let mut out = Vec::with_capacity(taus.len() * n_list.len());
    for &tau in taus {
        for &n in n_list {
            let seq = build_dd_sequence(n, tau, drive, edge)?;
            let stats = run_ensemble(initial, &seq, spec, dissipator, settings)?;
            out.push(ScanPoint {
                tau_us: tau,
                n_gates: n,
                stats,
            });
        }
    }
    Ok(out)
}

/// Bright-state population on a (splitting × τ × N) grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub splitting_mhz: Vec<f64>,
    pub tau_us: Vec<f64>,
    pub n_gates: Vec<usize>,
    /// Splitting-major, then τ, then N.
    pub p_plus: Vec<f64>,
    /// Zero: every grid point is a single deterministic realization.
    pub stderr: Vec<f64>,
}

impl SweepResult {
    pub fn index(&self, i_split: usize, i_tau: usize, i_n: usize) -> usize {
        (i_split * self.tau_us.len() + i_tau) * self.n_gates.len() + i_n
    }

    pub fn get(&self, i_split: usize, i_tau: usize, i_n: usize) -> f64 {
        self.p_plus[self.index(i_split, i_tau, i_n)]
    }

    /// Mean of `p_plus` over the whole grid for the `i_n`-th gate count.
    pub fn grid_mean(&self, i_n: usize) -> f64 {
        let mut sum = 0.0;
        for s in 0..self.splitting_mhz.len() {
            for t in 0..self.tau_us.len() {
                sum += self.get(s, t, i_n);
            }
        }
        sum / (self.splitting_mhz.len() * self.tau_us.len()) as f64
    }
}

/// Deterministic leakage map: the splitting axis is the bath variable, so
/// each grid point is one noiseless propagation from `|+⟩`.
pub fn sweep_leakage_map(
    splittings: &[f64],
    taus: &[f64],
    n_list: &[usize],
    drive: &DriveParams,
    edge: EdgeConvention,
) -> Result<SweepResult> {
    if splittings.is_empty() || taus.is_empty() || n_list.is_empty() {
        return Err(invalid("grid", "sweep grids must be nonempty"));
    }
    let settings = IntegratorSettings::default();
    let sequences: Vec<DDSequence> = taus
        .iter()
        .flat_map(|&tau| n_list.iter().map(move |&n| (n, tau)))
        .map(|(n, tau)| build_dd_sequence(n, tau, drive, edge))
        .collect::<Result<_>>()?;
    let rows: Vec<Result<Vec<f64>>> = splittings
        .par_iter()
        .map(|&split| {
            let bath = BathRealization::fixed(split);
            sequences
                .iter()
                .map(|seq| {
                    propagate_sequence(StateVector::bright(), seq, &bath, None, &settings).map(|r| r.populations.plus)
                })
                .collect()
        })
        .collect();
    let mut p_plus = Vec::with_capacity(splittings.len() * sequences.len());
    for row in rows {
        p_plus.extend(row?);
    }
    let stderr = vec![0.0; p_plus.len()];
    Ok(SweepResult {
        splitting_mhz: splittings.to_vec(),
        tau_us: taus.to_vec(),
        n_gates: n_list.to_vec(),
        p_plus,
        stderr,
    })
}

/// `count` evenly spaced points from `start` with spacing `step`, computed
/// as `start + i·step` so no rounding accumulates.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(invalid("grid", format!("bad range {start}..{stop} step {step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}
