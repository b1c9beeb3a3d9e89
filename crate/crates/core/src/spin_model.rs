//! Rotating-frame Hamiltonian, bath noise ensemble and T1 dissipator.

use std::f64::consts::SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::qutrit::{c, spin_operator, Axis, Mat3, Operator3, ANCILLA, MINUS_ONE, PLUS_ONE};
use crate::units::{khz_to_angular, mhz_to_angular};

/// How the geometric gate duration is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateTiming {
    /// `2π/√(Ω² + Δ²)`: keeps the operational-space rotation cyclic under detuning.
    #[default]
    Generalized,
    /// `2π/Ω`.
    Plain,
}

/// Microwave drive of the geometric gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Ω/2π in MHz.
    pub rabi_mhz: f64,
    /// Δ/2π in kHz.
    pub detuning_khz: f64,
    /// Drive phase; rotates the coupling between `Sx` and `Sy`.
    pub phase_rad: f64,
    /// Fractional pulse-length error (angle error), 0 for an ideal pulse.
    pub pulse_length_error: f64,
    pub gate_timing: GateTiming,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            rabi_mhz: 25.0,
            detuning_khz: 130.0,
            phase_rad: 0.0,
            pulse_length_error: 0.0,
            gate_timing: GateTiming::Generalized,
        }
    }
}

impl DriveParams {
    pub fn ideal(rabi_mhz: f64) -> Self {
        Self {
            rabi_mhz,
            detuning_khz: 0.0,
            phase_rad: 0.0,
            pulse_length_error: 0.0,
            gate_timing: GateTiming::Generalized,
        }
    }

    pub fn with_detuning(mut self, detuning_khz: f64) -> Self {
        self.detuning_khz = detuning_khz;
        self
    }

    pub fn with_pulse_length_error(mut self, eps: f64) -> Self {
        self.pulse_length_error = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_mhz > 0.0 && self.rabi_mhz.is_finite()) {
            return Err(invalid("rabi_mhz", format!("must be > 0, got {}", self.rabi_mhz)));
        }
        if !(self.pulse_length_error.abs() < 0.5) {
            return Err(invalid(
                "pulse_length_error",
                format!("must satisfy |e| < 0.5, got {}", self.pulse_length_error),
            ));
        }
        if !self.detuning_khz.is_finite() || !self.phase_rad.is_finite() {
            return Err(invalid("detuning_khz", "must be finite"));
        }
        Ok(())
    }

    /// Ω in rad/µs.
    pub fn rabi_angular(&self) -> f64 {
        mhz_to_angular(self.rabi_mhz)
    }

    /// Δ in rad/µs.
    pub fn detuning_angular(&self) -> f64 {
        khz_to_angular(self.detuning_khz)
    }

    /// Duration of one geometric bit-flip gate in µs, including the
    /// pulse-length error.
    pub fn gate_duration(&self) -> f64 {
        let omega = self.rabi_angular();
        let effective = match self.gate_timing {
            GateTiming::Generalized => omega.hypot(self.detuning_angular()),
            GateTiming::Plain => omega,
        };
        (1.0 + self.pulse_length_error) * std::f64::consts::TAU / effective
    }
}

/// Classical noise acting on the qubit splitting and the detuning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Full width at 1/e of the Gaussian ¹³C splitting distribution, MHz.
    pub c13_width_1e_mhz: f64,
    /// ¹⁴N hyperfine offset A, MHz; lines at −A, 0, +A with weight 1/3.
    pub n14_splitting_mhz: f64,
    /// Relaxation time between qubit levels and the ancilla; `None` is infinite.
    pub t1_ms: Option<f64>,
    /// Stationary standard deviation of the OU splitting noise, MHz.
    pub ou_amplitude_mhz: f64,
    pub ou_correlation_time_us: f64,
    /// Per-run standard deviation of the detuning offset, kHz.
    pub detuning_jitter_khz: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noiseless()
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            c13_width_1e_mhz: 0.0,
            n14_splitting_mhz: 0.0,
            t1_ms: None,
            ou_amplitude_mhz: 0.0,
            ou_correlation_time_us: 0.0,
            detuning_jitter_khz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("c13_width_1e_mhz", self.c13_width_1e_mhz),
            ("n14_splitting_mhz", self.n14_splitting_mhz),
            ("ou_amplitude_mhz", self.ou_amplitude_mhz),
            ("ou_correlation_time_us", self.ou_correlation_time_us),
            ("detuning_jitter_khz", self.detuning_jitter_khz),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || v.is_nan() {
                return Err(invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        if let Some(t1) = self.t1_ms {
            if !(t1 > 0.0) {
                return Err(invalid("t1_ms", format!("must be > 0 or absent, got {t1}")));
            }
        }
        if self.ou_amplitude_mhz > 0.0 && !(self.ou_correlation_time_us > 0.0) {
            return Err(invalid(
                "ou_correlation_time_us",
                "must be > 0 when ou_amplitude_mhz > 0",
            ));
        }
        Ok(())
    }

    /// Standard deviation of the Gaussian ¹³C component: the density
    /// `exp(−x²/2σ²)` falls to 1/e at `x = w/2`, so `σ = w/(2√2)`.
    pub fn c13_sigma_mhz(&self) -> f64 {
        self.c13_width_1e_mhz / (2.0 * SQRT_2)
    }

    pub fn has_ou(&self) -> bool {
        self.ou_amplitude_mhz > 0.0
    }

    pub fn is_static_noiseless(&self) -> bool {
        self.c13_width_1e_mhz == 0.0
            && self.n14_splitting_mhz == 0.0
            && self.detuning_jitter_khz == 0.0
            && !self.has_ou()
    }
}

/// Ornstein–Uhlenbeck splitting path sampled on `t_k = k·dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuPath {
    dt: f64,
    values: Vec<f64>,
}

impl OuPath {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Samples in MHz.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| k as f64 * self.dt)
    }

    /// Linear interpolation; held constant past either end.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.values.len();
        if n == 1 || t <= 0.0 {
            return self.values[0];
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k >= n - 1 {
            return self.values[n - 1];
        }
        let frac = x - k as f64;
        self.values[k] + frac * (self.values[k + 1] - self.values[k])
    }

    /// `∫ value dt` over `[t0, t1]` of the interpolated path, MHz·µs.
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        // breakpoints between t0 and t1
        let mut acc = 0.0;
        let mut a = t0;
        let mut va = self.value_at(t0);
        let mut k = (t0 / self.dt).floor() as i64 + 1;
        loop {
            let tk = k as f64 * self.dt;
            let b = if tk < t1 { tk } else { t1 };
            let vb = self.value_at(b);
            acc += 0.5 * (va + vb) * (b - a);
            if b >= t1 {
                break;
            }
            a = b;
            va = vb;
            k += 1;
        }
        acc
    }
}

/// One draw of the classical bath.
#[derive(Clone, Debug, PartialEq)]
pub struct BathRealization {
    /// Static `|+1⟩`–`|−1⟩` splitting δ, MHz.
    pub splitting_mhz: f64,
    /// Offset added to the drive detuning, kHz.
    pub detuning_offset_khz: f64,
    pub ou: Option<OuPath>,
}

impl BathRealization {
    pub fn fixed(splitting_mhz: f64) -> Self {
        Self {
            splitting_mhz,
            detuning_offset_khz: 0.0,
            ou: None,
        }
    }

    pub fn with_ou(mut self, path: OuPath) -> Self {
        self.ou = Some(path);
        self
    }

    pub fn is_time_dependent(&self) -> bool {
        self.ou.is_some()
    }

    /// Total splitting at time `t` (µs), MHz.
    pub fn splitting_at(&self, t: f64) -> f64 {
        self.splitting_mhz + self.ou.as_ref().map_or(0.0, |p| p.value_at(t))
    }

    /// `∫ δ(t) dt` over `[t0, t1]`, MHz·µs.
    pub fn splitting_integral(&self, t0: f64, t1: f64) -> f64 {
        self.splitting_mhz * (t1 - t0) + self.ou.as_ref().map_or(0.0, |p| p.integral(t0, t1))
    }

    /// The drive as seen by this realization (detuning offset applied).
    pub fn effective_drive(&self, drive: &DriveParams) -> DriveParams {
        DriveParams {
            detuning_khz: drive.detuning_khz + self.detuning_offset_khz,
            ..*drive
        }
    }
}

/// Rotating-frame Hamiltonian in rad/µs:
/// `H = −Δ(|+1⟩⟨+1| + |−1⟩⟨−1|) + πδ(|+1⟩⟨+1| − |−1⟩⟨−1|) + [drive] (Ω/2)(cosφ Sx + sinφ Sy)`.
pub fn rotating_hamiltonian(drive: &DriveParams, splitting_mhz: f64, drive_on: bool) -> Operator3 {
    let det = drive.detuning_angular();
    let half_split = 0.5 * mhz_to_angular(splitting_mhz);
    let mut m = Mat3::zeros();
    m[(PLUS_ONE, PLUS_ONE)] = c(-det + half_split);
    m[(MINUS_ONE, MINUS_ONE)] = c(-det - half_split);
    let mut h = Operator3(m);
    if drive_on {
        let (s, co) = drive.phase_rad.sin_cos();
        let s_phi = spin_operator(Axis::X).scale(co) + spin_operator(Axis::Y).scale(s);
        h = h + s_phi.scale(0.5 * drive.rabi_angular());
    }
    h
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        // keep the stream aligned regardless of which widths are zero
        let _: f64 = rng.random();
        0.0
    }
}

/// Draws the static part of a bath realization (no OU path).
///
/// `δ = N(0, w/(2√2)) + uniform{−A, 0, +A}` and a detuning offset
/// `N(0, jitter)`. Identical seeds give bit-identical draws.
pub fn sample_bath_realization(noise: &NoiseModel, seed: u64) -> BathRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = gaussian(&mut rng, noise.c13_sigma_mhz());
    let line = match rng.random_range(0..3u8) {
        0 => -noise.n14_splitting_mhz,
        1 => 0.0,
        _ => noise.n14_splitting_mhz,
    };
    let offset = gaussian(&mut rng, noise.detuning_jitter_khz);
    BathRealization {
        splitting_mhz: gauss + line,
        detuning_offset_khz: offset,
        ou: None,
    }
}

/// Stationary OU path of length `duration` (µs) with exact discrete update
/// `x' = x e^{−dt/τc} + N(0, a √(1 − e^{−2dt/τc}))`.
pub fn ou_trajectory(noise: &NoiseModel, duration: f64, dt: f64, seed: u64) -> Result<OuPath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(invalid("duration", format!("must be >= 0, got {duration}")));
    }
    let steps = (duration / dt).ceil() as usize;
    let amp = noise.ou_amplitude_mhz;
    if amp == 0.0 {
        return Ok(OuPath {
            dt,
            values: vec![0.0; steps + 1],
        });
    }
    let tau_c = noise.ou_correlation_time_us;
    if !(tau_c > 0.0) {
        return Err(invalid("ou_correlation_time_us", "must be > 0"));
    }
    let decay = (-dt / tau_c).exp();
    let kick = amp * (-(-2.0 * dt / tau_c).exp_m1()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = amp * unit.sample(&mut rng);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(x);
    for _ in 0..steps {
        x = x * decay + kick * unit.sample(&mut rng);
        values.push(x);
    }
    Ok(OuPath { dt, values })
}

/// Lindblad jump operators with rates in 1/ms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dissipator {
    pub jumps: Vec<(Operator3, f64)>,
}

impl Dissipator {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.iter().all(|(_, r)| *r == 0.0)
    }
}

fn ket_bra(i: usize, j: usize) -> Operator3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = c(1.0);
    Operator3(m)
}

/// Symmetric relaxation between each qubit level and the ancilla.
///
/// Jumps `|0⟩⟨±1|` and `|±1⟩⟨0|` all run at `γ = 1/T1`. The qubit coherence
/// `⟨+1|ρ|−1⟩` then decays exactly as `e^{−t/T1}`, and the qubit-manifold
/// versus ancilla population difference relaxes at `3/T1`. `None` (infinite
/// T1) gives an empty dissipator.
pub fn build_dissipator(t1_ms: Option<f64>) -> Result<Dissipator> {
    let Some(t1) = t1_ms else {
        return Ok(Dissipator::empty());
    };
    if !(t1 > 0.0) {
        return Err(invalid("t1_ms", format!("must be > 0, got {t1}")));
    }
    if t1.is_infinite() {
        return Ok(Dissipator::empty());
    }
    let rate = 1.0 / t1;
    Ok(Dissipator {
        jumps: vec![
            (ket_bra(ANCILLA, PLUS_ONE), rate),
            (ket_bra(PLUS_ONE, ANCILLA), rate),
            (ket_bra(ANCILLA, MINUS_ONE), rate),
            (ket_bra(MINUS_ONE, ANCILLA), rate),
        ],
    })
}

/// Inter-gate intervals `τ_n = n/f` (µs) at which free evolution under the
/// detuning `f` (kHz) completes whole cycles.
pub fn resonance_taus(detuning_khz: f64, n_max: usize) -> Result<Vec<f64>> {
    if detuning_khz == 0.0 || !detuning_khz.is_finite() {
        return Err(Error::InvalidParameter {
            name: "detuning_khz",
            reason: "resonances need a nonzero detuning".into(),
        });
    }
    if n_max == 0 {
        return Err(invalid("n_max", "must be >= 1"));
    }
    let f_mhz = detuning_khz.abs() * 1e-3;
    Ok((1..=n_max).map(|n| n as f64 / f_mhz).collect())
}
