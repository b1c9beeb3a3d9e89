//! Curve fitting and derived coherence quantities.

mod coherence;
mod dips;
mod fit;
mod models;

pub use coherence::{normalize_envelope, observed_coherence_time, pure_coherence_time, pure_coherence_time_with_error};
pub use dips::{find_dips, measure_dip, DipOptions, DipReport, DipShape, DEFAULT_PROMINENCE};
pub use fit::{Bootstrap, FitOptions, FitParameter, FitResult};
pub use models::{fit_coherence_envelope, fit_gate_error, fit_power_law, gate_error_plateau};
