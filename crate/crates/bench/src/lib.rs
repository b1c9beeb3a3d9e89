//! Shared fixtures for the criterion benchmarks.

use geodd::{build_dd_sequence, DDSequence, DriveParams, EdgeConvention, NoiseModel};

/// Drive and bath parameters of the reference experiment.
pub fn reference_drive() -> DriveParams {
    DriveParams::default()
}

pub fn reference_noise() -> NoiseModel {
    NoiseModel {
        c13_width_1e_mhz: 0.3,
        n14_splitting_mhz: 2.2,
        t1_ms: Some(2.6),
        ..NoiseModel::noiseless()
    }
}

pub fn sequence(n: usize, tau_us: f64) -> DDSequence {
    build_dd_sequence(n, tau_us, &reference_drive(), EdgeConvention::HalfInterval).expect("valid sequence")
}
