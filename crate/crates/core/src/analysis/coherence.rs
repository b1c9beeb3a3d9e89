//! Splitting observed coherence into relaxation and pure dephasing:
//! `1/T₂ = 1/T₂^pure + 1/T₁`.

use crate::error::{invalid, Error, Result};

/// Closest approach of `t2` to `t1` before the pure time is treated as
/// divergent.
const POLE_MARGIN: f64 = 1e-9;

/// `T₂^pure = 1/(1/T₂ − 1/T₁)`. Any unit, as long as both agree.
///
/// Fails when `t2 ≥ t1`: relaxation between the qubit levels and the
/// ancilla caps the observed coherence time at `T₁` itself.
pub fn pure_coherence_time(t2: f64, t1: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(invalid("t1", format!("must be > 0, got {t1}")));
    }
    if !(t2 > 0.0) {
        return Err(invalid("t2", format!("must be > 0, got {t2}")));
    }
    if t1.is_infinite() {
        return Ok(t2);
    }
    if t2 >= t1 * (1.0 - POLE_MARGIN) {
        return Err(Error::Unphysical { t2, t1 });
    }
    Ok(1.0 / (1.0 / t2 - 1.0 / t1))
}

/// [`pure_coherence_time`] with first-order propagation of independent
/// standard errors. Returns `(T₂^pure, σ)`.
pub fn pure_coherence_time_with_error(t2: f64, t2_err: f64, t1: f64, t1_err: f64) -> Result<(f64, f64)> {
    let value = pure_coherence_time(t2, t1)?;
    if t1.is_infinite() {
        return Ok((value, t2_err));
    }
    let d_t2 = value * value / (t2 * t2);
    let d_t1 = value * value / (t1 * t1);
    Ok((value, ((d_t2 * t2_err).powi(2) + (d_t1 * t1_err).powi(2)).sqrt()))
}

/// `T₂ = 1/(1/T₂^pure + 1/T₁)`.
pub fn observed_coherence_time(t2_pure: f64, t1: f64) -> f64 {
    1.0 / (1.0 / t2_pure + 1.0 / t1)
}

/// Divides raw amplitudes by the fidelity plateau. The plateau is the
/// fidelity reached without decoherence, e.g. from a gate-error fit.
pub fn normalize_envelope(amplitudes: &[f64], plateau: f64) -> Result<Vec<f64>> {
    if !(plateau > 0.0) {
        return Err(invalid("plateau", format!("must be > 0, got {plateau}")));
    }
    Ok(amplitudes.iter().map(|a| a / plateau).collect())
}
