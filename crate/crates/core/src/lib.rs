//! Simulation and analysis of dynamical decoupling for a geometric qubit
//! encoded in the degenerate `|±1⟩` levels of a spin-1 system.
//!
//! The crate is organized bottom-up:
//!
//! * [`qutrit`]: three-level states, operators, propagators and fidelities.
//! * [`spin_model`]: rotating-frame Hamiltonian, bath noise and T1 relaxation.
//! * [`sequence`]: the geometric bit-flip gate and the N-gate decoupling
//!   sequence, propagated either unitarily or through the master equation.
//! * [`ensemble`]: seeded Monte Carlo over bath realizations and leakage maps.
//! * [`analysis`]: decay fits, coherence-time bookkeeping and dip detection.
//!
//! Frequencies cross the public boundary as ordinary frequencies (MHz, kHz);
//! internally everything runs in rad/µs and µs.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensemble;
pub mod error;
mod lindblad;
pub mod qutrit;
pub mod sequence;
pub mod spin_model;
pub mod units;

pub use error::{Error, Result};
pub use qutrit::{
    bright_dark_transform, populations, propagator, spin_operator, state_fidelity, Axis, BrightDark, DensityOperator,
    Operator3, Populations, StateVector,
};
pub use sequence::{
    build_dd_sequence, geometric_flip_unitary, propagate_sequence, DDSequence, EdgeConvention, InitialState,
    IntegratorSettings, PulseSegment, SimulationResult,
};
pub use spin_model::{
    build_dissipator, ou_trajectory, resonance_taus, rotating_hamiltonian, sample_bath_realization, BathRealization,
    Dissipator, DriveParams, GateTiming, NoiseModel, OuPath,
};
