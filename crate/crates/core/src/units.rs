//! Boundary conversions. Public parameters are ordinary frequencies (MHz,
//! kHz) and times in µs or ms; internally everything is rad/µs and µs.

use std::f64::consts::TAU;

/// Ordinary frequency in MHz to angular frequency in rad/µs.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    TAU * f_mhz
}

/// Ordinary frequency in kHz to angular frequency in rad/µs.
pub fn khz_to_angular(f_khz: f64) -> f64 {
    TAU * f_khz * 1e-3
}

pub fn ms_to_us(t_ms: f64) -> f64 {
    t_ms * 1e3
}

pub fn us_to_ms(t_us: f64) -> f64 {
    t_us * 1e-3
}
