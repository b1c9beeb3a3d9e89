//! Geometric bit-flip gate, the N-gate decoupling sequence, and propagation
//! of states through it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lindblad::{self, DriftMonitor, Jumps};
use crate::qutrit::{
    c, hermitian_part, hermiticity_error, overlap, propagator_unchecked, spin_operator, Axis, DensityOperator, Mat3,
    Operator3, Populations, QutritState, StateVector, C64,
};
use crate::spin_model::{rotating_hamiltonian, BathRealization, Dissipator, DriveParams};
use crate::units::mhz_to_angular;

/// Where the free evolution sits relative to the gates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeConvention {
    /// `τ/2 – G – τ – G – … – G – τ/2`
    #[default]
    HalfInterval,
    /// `(G – τ)×N`
    FullInterval,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSegment {
    pub duration: f64,
    pub drive_on: bool,
    pub drive: DriveParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DDSequence {
    pub gate_count: usize,
    /// Inter-gate interval τ, µs.
    pub interval: f64,
    pub edge_convention: EdgeConvention,
    pub drive: DriveParams,
    pub segments: Vec<PulseSegment>,
}

impl DDSequence {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn free_time(&self) -> f64 {
        self.segments.iter().filter(|s| !s.drive_on).map(|s| s.duration).sum()
    }
}

/// Propagator of the driven rotating-frame Hamiltonian over one gate.
///
/// For ideal parameters this is `−1` on `{|0⟩, |+⟩}` and `+1` on `|−⟩`:
/// the operational-space 2π rotation flips `|+1⟩ ↔ |−1⟩` through a
/// geometric phase on the bright state.
pub fn geometric_flip_unitary(drive: &DriveParams, splitting_mhz: f64) -> Result<Operator3> {
    drive.validate()?;
    let h = rotating_hamiltonian(drive, splitting_mhz, true);
    Ok(propagator_unchecked(&h, drive.gate_duration()))
}

/// The error-free gate `exp(−iπ Sx)`.
pub fn ideal_flip() -> Operator3 {
    propagator_unchecked(&spin_operator(Axis::X), PI)
}

pub fn build_dd_sequence(
    n: usize,
    tau: f64,
    drive: &DriveParams,
    edge_convention: EdgeConvention,
) -> Result<DDSequence> {
    if n == 0 {
        return Err(invalid("n_gates", "need at least one gate"));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(invalid("tau_us", format!("must be >= 0, got {tau}")));
    }
    drive.validate()?;
    let gate = PulseSegment {
        duration: drive.gate_duration(),
        drive_on: true,
        drive: *drive,
    };
    let free = |duration: f64| PulseSegment {
        duration,
        drive_on: false,
        drive: *drive,
    };
    let mut segments = Vec::with_capacity(2 * n + 1);
    match edge_convention {
        EdgeConvention::HalfInterval => {
            segments.push(free(0.5 * tau));
            for k in 0..n {
                segments.push(gate);
                segments.push(free(if k + 1 == n { 0.5 * tau } else { tau }));
            }
        }
        EdgeConvention::FullInterval => {
            for _ in 0..n {
                segments.push(gate);
                segments.push(free(tau));
            }
        }
    }
    segments.retain(|s| s.drive_on || s.duration > 0.0);
    Ok(DDSequence {
        gate_count: n,
        interval: tau,
        edge_convention,
        drive: *drive,
        segments,
    })
}

/// Initial condition for [`propagate_sequence`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl From<StateVector> for InitialState {
    fn from(v: StateVector) -> Self {
        InitialState::Pure(v)
    }
}

impl From<DensityOperator> for InitialState {
    fn from(r: DensityOperator) -> Self {
        InitialState::Mixed(r)
    }
}

impl InitialState {
    pub fn density(&self) -> DensityOperator {
        match self {
            InitialState::Pure(v) => v.to_density(),
            InitialState::Mixed(r) => *r,
        }
    }
}

/// Step sizes for the Lindblad path (µs). Ignored on the unitary path except
/// for the OU sampling of gate segments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    /// RK4 step inside drive pulses.
    pub dt_us: f64,
    /// RK4 step during free evolution.
    pub free_dt_us: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            dt_us: DEFAULT_DT_US,
            free_dt_us: DEFAULT_FREE_DT_US,
        }
    }
}

impl IntegratorSettings {
    pub fn uniform(dt_us: f64) -> Self {
        Self {
            dt_us,
            free_dt_us: dt_us,
        }
    }

    pub fn halved(&self) -> Self {
        Self {
            dt_us: 0.5 * self.dt_us,
            free_dt_us: 0.5 * self.free_dt_us,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_us > 0.0) || !(self.free_dt_us > 0.0) {
            return Err(invalid("dt_us", "integration steps must be > 0"));
        }
        Ok(())
    }
}

/// 160 steps per gate at Ω/2π = 25 MHz.
pub const DEFAULT_DT_US: f64 = 2.5e-4;
pub const DEFAULT_FREE_DT_US: f64 = 2e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult {
    pub final_state: DensityOperator,
    pub populations: Populations,
    /// `Tr(ρ_final ρ_target)` with the target the initial state advanced by
    /// the ideal gate `N` times.
    pub fidelity: f64,
    pub total_time: f64,
    /// Largest `|Tr ρ − 1|` seen while integrating; on the unitary path, the
    /// norm drift of the final state.
    pub trace_drift: f64,
    pub hermiticity_error: f64,
}

/// Free evolution is diagonal: `exp(−i∫H)` with phases from the detuning
/// and the integrated splitting.
fn free_propagator(detuning: f64, splitting_integral_mhz_us: f64, duration: f64) -> Operator3 {
    let half = 0.5 * mhz_to_angular(splitting_integral_mhz_us);
    let phase_plus = detuning * duration - half;
    let phase_minus = detuning * duration + half;
    let mut m = Mat3::zeros();
    m[(0, 0)] = C64::from_polar(1.0, phase_plus);
    m[(1, 1)] = c(1.0);
    m[(2, 2)] = C64::from_polar(1.0, phase_minus);
    Operator3(m)
}

/// Exact propagator for each segment of `seq` under `bath`.
fn segment_unitaries(seq: &DDSequence, bath: &BathRealization) -> Vec<Operator3> {
    let mut out = Vec::with_capacity(seq.segments.len());
    let mut t = 0.0;
    let static_bath = !bath.is_time_dependent();
    let mut cache: Vec<(PulseSegment, Operator3)> = Vec::new();
    for seg in &seq.segments {
        let drive = bath.effective_drive(&seg.drive);
        let u = if static_bath {
            if let Some((_, u)) = cache.iter().find(|(s, _)| s == seg) {
                *u
            } else {
                let u = segment_unitary(seg, &drive, bath, t);
                cache.push((*seg, u));
                u
            }
        } else {
            segment_unitary(seg, &drive, bath, t)
        };
        out.push(u);
        t += seg.duration;
    }
    out
}

fn segment_unitary(seg: &PulseSegment, drive: &DriveParams, bath: &BathRealization, t0: f64) -> Operator3 {
    if seg.drive_on {
        // OU varies negligibly within one pulse; sample at its midpoint
        let split = bath.splitting_at(t0 + 0.5 * seg.duration);
        propagator_unchecked(&rotating_hamiltonian(drive, split, true), seg.duration)
    } else {
        free_propagator(
            drive.detuning_angular(),
            bath.splitting_integral(t0, t0 + seg.duration),
            seg.duration,
        )
    }
}

fn target_state(initial: &DensityOperator, n: usize) -> DensityOperator {
    ideal_flip().powi(n as u32).conjugate(initial)
}

fn finish(rho: Mat3, initial: &DensityOperator, seq: &DDSequence, monitor: DriftMonitor) -> SimulationResult {
    let tr = rho.trace().re;
    let final_state = DensityOperator::from_matrix_unchecked(hermitian_part(&rho).map(|z| z / tr));
    let populations = final_state.bright_dark_populations();
    let fidelity = overlap(&final_state, &target_state(initial, seq.gate_count));
    SimulationResult {
        final_state,
        populations,
        fidelity,
        total_time: seq.total_duration(),
        trace_drift: monitor.trace_drift,
        hermiticity_error: monitor.hermiticity_error,
    }
}

/// Propagates `initial` through `seq`.
///
/// Without a dissipator the exact segment propagators are multiplied. With
/// one, the master equation is integrated by fixed-step RK4; the Hamiltonian
/// is refreshed from the OU path at every stage when the bath has one.
pub fn propagate_sequence(
    initial: impl Into<InitialState>,
    seq: &DDSequence,
    bath: &BathRealization,
    dissipator: Option<&Dissipator>,
    settings: &IntegratorSettings,
) -> Result<SimulationResult> {
    let initial = initial.into();
    let rho0 = initial.density();
    match dissipator.filter(|d| !d.is_empty()) {
        None => Ok(propagate_unitary(initial, &rho0, seq, bath)),
        Some(d) => {
            settings.validate()?;
            propagate_lindblad(&rho0, seq, bath, d, settings)
        }
    }
}

fn propagate_unitary(
    initial: InitialState,
    rho0: &DensityOperator,
    seq: &DDSequence,
    bath: &BathRealization,
) -> SimulationResult {
    let us = segment_unitaries(seq, bath);
    let total = us.iter().fold(Operator3::identity(), |acc, u| *u * acc);
    let rho = match initial {
        InitialState::Pure(v) => total.apply(&v).to_density(),
        InitialState::Mixed(r) => total.conjugate(&r),
    };
    let m = *rho.matrix();
    let monitor = DriftMonitor {
        trace_drift: (m.trace() - c(1.0)).norm(),
        hermiticity_error: hermiticity_error(&m),
    };
    finish(m, rho0, seq, monitor)
}

fn propagate_lindblad(
    rho0: &DensityOperator,
    seq: &DDSequence,
    bath: &BathRealization,
    dissipator: &Dissipator,
    settings: &IntegratorSettings,
) -> Result<SimulationResult> {
    let jumps = Jumps::new(dissipator);
    let relaxation = lindblad::lindbladian(&Operator3::zeros(), &jumps);
    // Relaxation that commutes with diagonal phases lets free evolution be
    // solved exactly: relax, then apply the free propagator.
    let covariant = lindblad::is_phase_covariant(&relaxation);
    let time_dependent = bath.is_time_dependent();
    let mut free_cache: Vec<(f64, lindblad::Super)> = Vec::new();
    let mut gate_cache: Vec<(PulseSegment, lindblad::Super)> = Vec::new();
    let mut monitor = DriftMonitor::default();
    let mut rho = *rho0.matrix();
    let mut t = 0.0;
    for seg in &seq.segments {
        let drive = bath.effective_drive(&seg.drive);
        let step = if seg.drive_on {
            settings.dt_us
        } else {
            settings.free_dt_us
        };
        if !seg.drive_on && covariant {
            let map = match free_cache.iter().find(|(d, _)| *d == seg.duration) {
                Some((_, m)) => *m,
                None => {
                    let m = lindblad::covariant_map(&relaxation, seg.duration);
                    free_cache.push((seg.duration, m));
                    m
                }
            };
            let u = free_propagator(
                drive.detuning_angular(),
                bath.splitting_integral(t, t + seg.duration),
                seg.duration,
            );
            rho = u.0 * lindblad::unvec_rho(&(map * lindblad::vec_rho(&rho))) * u.0.adjoint();
        } else if !time_dependent {
            let map = match gate_cache.iter().find(|(s, _)| s == seg) {
                Some((_, m)) => *m,
                None => {
                    let h = rotating_hamiltonian(&drive, bath.splitting_mhz, seg.drive_on);
                    let m = lindblad::rk4_segment_map(&lindblad::lindbladian(&h, &jumps), seg.duration, step);
                    gate_cache.push((*seg, m));
                    m
                }
            };
            rho = lindblad::unvec_rho(&(map * lindblad::vec_rho(&rho)));
        } else if seg.drive_on {
            // as on the unitary path, the splitting is frozen at the pulse midpoint
            let split = bath.splitting_at(t + 0.5 * seg.duration);
            let h = rotating_hamiltonian(&drive, split, true);
            let (steps, h_step) = lindblad::step_count(seg.duration, step);
            let one = lindblad::rk4_one_step(&lindblad::lindbladian(&h, &jumps), h_step);
            let mut v = lindblad::vec_rho(&rho);
            for _ in 0..steps {
                v = one * v;
            }
            rho = lindblad::unvec_rho(&v);
        } else {
            let hamiltonian_at = |time: f64| rotating_hamiltonian(&drive, bath.splitting_at(time), false).0;
            let (steps, h) = lindblad::step_count(seg.duration, step);
            for k in 0..steps {
                rho = lindblad::rk4_step(&hamiltonian_at, &jumps, &rho, t + k as f64 * h, h);
            }
        }
        t += seg.duration;
        monitor.check(&rho, t)?;
    }
    Ok(finish(rho, rho0, seq, monitor))
}
