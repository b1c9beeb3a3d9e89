//! Fixed-step RK4 integration of the Lindblad master equation
//! `dρ/dt = −i[H,ρ] + Σ γ (LρL† − ½{L†L, ρ})` on a qutrit.
//!
//! For a constant generator `𝓛` one RK4 step is the linear map
//! `P = I + h𝓛 + (h𝓛)²/2 + (h𝓛)³/6 + (h𝓛)⁴/24`, so `n` steps equal `Pⁿ`.
//! Constant segments use that identity (binary powering of a 9×9
//! superoperator); time-dependent segments step the density matrix directly.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::qutrit::{c, hermiticity_error, Mat3, Operator3, C64};
use crate::spin_model::Dissipator;

pub type Super = SMatrix<C64, 9, 9>;
pub type VecRho = SVector<C64, 9>;

/// Largest tolerated `|Tr ρ − 1|` during integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Jump operators with rates converted to 1/µs.
#[derive(Clone, Debug)]
pub(crate) struct Jumps {
    ops: Vec<(Mat3, Mat3, f64)>,
    /// `½ Σ γ L†L`
    anticomm: Mat3,
}

impl Jumps {
    pub(crate) fn new(d: &Dissipator) -> Self {
        let mut ops = Vec::new();
        let mut anticomm = Mat3::zeros();
        for (l, rate_per_ms) in &d.jumps {
            let rate = rate_per_ms * 1e-3;
            if rate == 0.0 {
                continue;
            }
            let ld = l.0.adjoint();
            anticomm += (ld * l.0).map(|z| z * (0.5 * rate));
            ops.push((l.0, ld, rate));
        }
        Self { ops, anticomm }
    }

    fn apply(&self, rho: &Mat3) -> Mat3 {
        let mut out = -(self.anticomm * rho + rho * self.anticomm);
        for (l, ld, rate) in &self.ops {
            out += (l * rho * ld).map(|z| z * *rate);
        }
        out
    }
}

/// Right-hand side of the master equation.
pub(crate) fn lindblad_rhs(h: &Mat3, jumps: &Jumps, rho: &Mat3) -> Mat3 {
    let i = C64::i();
    let comm = h * rho - rho * h;
    comm.map(|z| -i * z) + jumps.apply(rho)
}

pub(crate) fn vec_rho(m: &Mat3) -> VecRho {
    VecRho::from_fn(|k, _| m[(k / 3, k % 3)])
}

pub(crate) fn unvec_rho(v: &VecRho) -> Mat3 {
    Mat3::from_fn(|i, j| v[3 * i + j])
}

/// Superoperator of `ρ ↦ A ρ B` for row-major vectorization: `A ⊗ Bᵀ`.
fn sandwich(a: &Mat3, b: &Mat3) -> Super {
    Super::from_fn(|r, col| {
        let (i, j) = (r / 3, r % 3);
        let (k, l) = (col / 3, col % 3);
        a[(i, k)] * b[(l, j)]
    })
}

/// The Lindbladian as a 9×9 matrix on row-major `vec(ρ)`.
pub(crate) fn lindbladian(h: &Operator3, jumps: &Jumps) -> Super {
    let id = Mat3::identity();
    let i = C64::i();
    let mut s = (sandwich(&h.0, &id) - sandwich(&id, &h.0)).map(|z| -i * z);
    s -= sandwich(&jumps.anticomm, &id) + sandwich(&id, &jumps.anticomm);
    for (l, ld, rate) in &jumps.ops {
        s += sandwich(l, ld).map(|z| z * *rate);
    }
    s
}
/// One RK4 step of length `h` for a constant generator, as a linear map.
pub(crate) fn rk4_one_step(generator: &Super, h: f64) -> Super {
    let a = generator.map(|z| z * h);
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    Super::identity() + a + a2.map(|z| z * 0.5) + a3.map(|z| z / 6.0) + a4.map(|z| z / 24.0)
}

/// Number of equal steps no longer than `dt` covering `duration`, and their length.
pub(crate) fn step_count(duration: f64, dt: f64) -> (u64, f64) {
    let steps = (duration / dt).ceil().max(1.0) as u64;
    (steps, duration / steps as f64)
}

/// RK4 propagation of a constant generator over `duration` with
/// `ceil(duration/dt)` equal steps.
pub(crate) fn rk4_segment_map(generator: &Super, duration: f64, dt: f64) -> Super {
    if duration <= 0.0 {
        return Super::identity();
    }
    let (steps, h) = step_count(duration, dt);
    matrix_power(&rk4_one_step(generator, h), steps)
}

/// True when `s` only maps each coherence `ρ_ij` onto itself and
/// populations onto populations, i.e. it commutes with every diagonal
/// unitary conjugation.
pub(crate) fn is_phase_covariant(s: &Super) -> bool {
    (0..9).all(|r| {
        (0..9).all(|col| {
            let (i, j) = (r / 3, r % 3);
            let (k, l) = (col / 3, col % 3);
            s[(r, col)] == C64::new(0.0, 0.0) || r == col || (i == j && k == l)
        })
    })
}

/// `exp(s·t)` of a phase-covariant generator: each coherence evolves by its
/// own exponential, populations by the exponential of the 3×3 rate block.
pub(crate) fn covariant_map(s: &Super, t: f64) -> Super {
    const POP: [usize; 3] = [0, 4, 8];
    let mut m = Super::zeros();
    for r in 0..9 {
        if r / 3 != r % 3 {
            m[(r, r)] = (s[(r, r)] * t).exp();
        }
    }
    let block = expm3(&Mat3::from_fn(|a, b| s[(POP[a], POP[b])] * t));
    for a in 0..3 {
        for b in 0..3 {
            m[(POP[a], POP[b])] = block[(a, b)];
        }
    }
    m
}

/// Taylor series with scaling and squaring; fine for the small, well
/// conditioned rate blocks met here.
fn expm3(a: &Mat3) -> Mat3 {
    let norm: f64 = a.iter().map(|z| z.norm()).sum();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.map(|z| z / 2f64.powi(squarings as i32));
    let mut term = Mat3::identity();
    let mut sum = Mat3::identity();
    for k in 1..=20 {
        term = term * scaled / c(k as f64);
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

fn matrix_power(m: &Super, mut n: u64) -> Super {
    let mut acc = Super::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            acc *= base;
        }
        n >>= 1;
        if n > 0 {
            base = base * base;
        }
    }
    acc
}

/// One classical RK4 step with a time-dependent Hamiltonian.
pub(crate) fn rk4_step<F>(hamiltonian_at: &F, jumps: &Jumps, rho: &Mat3, t: f64, h: f64) -> Mat3
where
    F: Fn(f64) -> Mat3,
{
    let h_start = hamiltonian_at(t);
    let h_mid = hamiltonian_at(t + 0.5 * h);
    let h_end = hamiltonian_at(t + h);
    let half = c(0.5 * h);
    let k1 = lindblad_rhs(&h_start, jumps, rho);
    let k2 = lindblad_rhs(&h_mid, jumps, &(rho + k1 * half));
    let k3 = lindblad_rhs(&h_mid, jumps, &(rho + k2 * half));
    let k4 = lindblad_rhs(&h_end, jumps, &(rho + k3 * c(h)));
    rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0)
}

/// Tracks trace and Hermiticity drift over an integration.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct DriftMonitor {
    pub trace_drift: f64,
    pub hermiticity_error: f64,
}

impl DriftMonitor {
    pub(crate) fn check(&mut self, rho: &Mat3, time_us: f64) -> Result<()> {
        let tr = rho.trace();
        let drift = (tr - c(1.0)).norm();
        self.trace_drift = self.trace_drift.max(drift);
        self.hermiticity_error = self.hermiticity_error.max(hermiticity_error(rho));
        if !(drift <= TRACE_DRIFT_LIMIT) {
            return Err(Error::StepSize { drift, time_us });
        }
        Ok(())
    }
}
