//! Locating resonance dips in a fidelity-vs-τ scan.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Default prominence, in absolute fidelity. High enough to pass over the
/// shallow (~0.06) short-τ dips that the ¹⁴N hyperfine lines imprint on an
/// ensemble scan.
pub const DEFAULT_PROMINENCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipOptions {
    /// A point counts as part of a dip when it lies this far below the
    /// rolling median.
    pub prominence: f64,
    /// Rolling-median window in points. `None` picks about a quarter of the
    /// scan (odd, at least 5).
    pub window: Option<usize>,
}

impl Default for DipOptions {
    fn default() -> Self {
        Self {
            prominence: DEFAULT_PROMINENCE,
            window: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DipReport {
    /// µs, ascending.
    pub dip_positions: Vec<f64>,
    /// Mean gap between consecutive dips in µs. With a single dip this is its
    /// position, as the dip series starts at τ = 0.
    pub mean_spacing: Option<f64>,
    /// Reciprocal of the mean spacing, in kHz.
    pub estimated_detuning_khz: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DipShape {
    /// µs.
    pub position: f64,
    /// Baseline minus the minimum.
    pub depth: f64,
    /// Full width at half depth, µs.
    pub width: f64,
}

fn check_scan(taus: &[f64], values: &[f64]) -> Result<()> {
    if taus.len() != values.len() {
        return Err(Error::InvalidData(format!(
            "{} taus but {} values",
            taus.len(),
            values.len()
        )));
    }
    if taus.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: taus.len(),
        });
    }
    if taus.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("taus", "must be strictly increasing"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in scan".into()));
    }
    Ok(())
}

fn median(buf: &mut [f64]) -> f64 {
    buf.sort_by(f64::total_cmp);
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

fn rolling_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            buf.clear();
            buf.extend_from_slice(&values[lo..hi]);
            median(&mut buf)
        })
        .collect()
}

/// Vertex of the parabola through three points around index `k`, falling
/// back to the sample itself at the edges or on a degenerate fit.
fn refine_minimum(taus: &[f64], values: &[f64], k: usize) -> (f64, f64) {
    if k == 0 || k + 1 >= taus.len() {
        return (taus[k], values[k]);
    }
    let (x0, x1, x2) = (taus[k - 1], taus[k], taus[k + 1]);
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return (x1, y1);
    }
    let x = (x1 - 0.5 * num / den).clamp(x0, x2);
    // Lagrange form
    let y = y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    (x, y.min(y1))
}

/// Finds dips lying more than `prominence` below a rolling median and
/// estimates the detuning from their spacing.
pub fn find_dips(taus: &[f64], values: &[f64], options: &DipOptions) -> Result<DipReport> {
    check_scan(taus, values)?;
    if !(options.prominence > 0.0) {
        return Err(invalid("prominence", "must be > 0"));
    }
    let window = match options.window {
        Some(w) if w < 3 => return Err(invalid("window", "must be >= 3")),
        Some(w) => w | 1,
        None => ((taus.len() / 4) | 1).max(5),
    };
    let baseline = rolling_median(values, window);

    let mut positions = Vec::new();
    let mut i = 0;
    while i < values.len() {
        if values[i] < baseline[i] - options.prominence {
            let start = i;
            while i < values.len() && values[i] < baseline[i] - options.prominence {
                i += 1;
            }
            let k = (start..i)
                .min_by(|&a, &b| values[a].total_cmp(&values[b]))
                .expect("non-empty region");
            // a minimum on the scan edge may be the flank of something outside it
            if k != 0 && k != values.len() - 1 {
                positions.push(refine_minimum(taus, values, k).0);
            }
        } else {
            i += 1;
        }
    }

    let mean_spacing = match positions.len() {
        0 => None,
        1 => Some(positions[0]),
        n => Some((positions[n - 1] - positions[0]) / (n - 1) as f64),
    };
    let estimated_detuning_khz = mean_spacing.filter(|s| *s > 0.0).map(|s| 1e3 / s);
    Ok(DipReport {
        dip_positions: positions,
        mean_spacing,
        estimated_detuning_khz,
    })
}

/// Measures the dip whose minimum lies within `search_us` of `near_tau`.
///
/// The baseline is the median of the whole scan, so the scan should extend
/// well past the dip on both sides. Width is the full width at half depth,
/// with crossings located by linear interpolation.
pub fn measure_dip(taus: &[f64], values: &[f64], near_tau: f64, search_us: f64) -> Result<DipShape> {
    check_scan(taus, values)?;
    if !(search_us > 0.0) {
        return Err(invalid("search_us", "must be > 0"));
    }
    let k = (0..taus.len())
        .filter(|&i| (taus[i] - near_tau).abs() <= search_us)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .ok_or_else(|| Error::InvalidData(format!("no samples within {search_us} µs of {near_tau} µs")))?;
    let baseline = median(&mut values.to_vec());
    let (position, minimum) = refine_minimum(taus, values, k);
    let depth = baseline - minimum;
    if !(depth > 0.0) {
        return Err(Error::InvalidData(format!(
            "no dip below the baseline near {near_tau} µs"
        )));
    }
    let half = baseline - 0.5 * depth;
    let crossing = |from: usize, to: usize| -> f64 {
        let (ya, yb) = (values[from], values[to]);
        taus[from] + (half - ya) / (yb - ya) * (taus[to] - taus[from])
    };
    let left = (1..=k)
        .rev()
        .find(|&i| values[i - 1] >= half)
        .map(|i| crossing(i, i - 1));
    let right = (k..taus.len() - 1)
        .find(|&i| values[i + 1] >= half)
        .map(|i| crossing(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok(DipShape {
            position,
            depth,
            width: r - l,
        }),
        _ => Err(Error::InvalidData(format!(
            "dip near {near_tau} µs does not recover to half depth inside the scan"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::linear_grid;

    fn lorentz_dips(taus: &[f64], centers: &[f64], depth: f64, hwhm: f64) -> Vec<f64> {
        taus.iter()
            .map(|t| {
                0.95 - centers
                    .iter()
                    .map(|c| depth / (1.0 + ((t - c) / hwhm).powi(2)))
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn synthetic_pair_gives_detuning() {
        let taus = linear_grid(0.5, 30.0, 0.1).unwrap();
        let vals = lorentz_dips(&taus, &[7.69, 15.38], 0.3, 0.3);
        let rep = find_dips(&taus, &vals, &DipOptions::default()).unwrap();
        assert_eq!(rep.dip_positions.len(), 2);
        assert!((rep.dip_positions[0] - 7.69).abs() < 0.02);
        let est = rep.estimated_detuning_khz.unwrap();
        assert!((est - 130.0).abs() / 130.0 < 0.02, "{est}");
    }

    #[test]
    fn monotone_curve_is_empty() {
        let taus = linear_grid(0.5, 30.0, 0.5).unwrap();
        let vals: Vec<f64> = taus.iter().map(|t| 1.0 - 0.01 * t).collect();
        let rep = find_dips(&taus, &vals, &DipOptions::default()).unwrap();
        assert!(rep.dip_positions.is_empty());
        assert!(rep.estimated_detuning_khz.is_none());
        assert!(rep.mean_spacing.is_none());
    }

    #[test]
    fn single_dip_spacing_is_its_position() {
        let taus = linear_grid(0.5, 12.0, 0.05).unwrap();
        let vals = lorentz_dips(&taus, &[7.69], 0.4, 0.2);
        let rep = find_dips(&taus, &vals, &DipOptions::default()).unwrap();
        assert_eq!(rep.dip_positions.len(), 1);
        assert!((rep.estimated_detuning_khz.unwrap() - 130.0).abs() < 1.0);
    }

    #[test]
    fn parabola_refines_between_samples() {
        let taus = linear_grid(0.0, 10.0, 0.5).unwrap();
        let vals: Vec<f64> = taus.iter().map(|t| 1.0 - 0.5 * (-(t - 5.2f64).powi(2)).exp()).collect();
        let rep = find_dips(&taus, &vals, &DipOptions::default()).unwrap();
        assert!((rep.dip_positions[0] - 5.2).abs() < 0.1);
    }

    #[test]
    fn width_of_lorentzian() {
        let taus = linear_grid(0.0, 20.0, 0.01).unwrap();
        let vals = lorentz_dips(&taus, &[10.0], 0.4, 0.5);
        let shape = measure_dip(&taus, &vals, 10.0, 1.0).unwrap();
        assert!((shape.position - 10.0).abs() < 1e-6);
        // baseline is the scan median, slightly under 0.95
        assert!((shape.width - 1.0).abs() < 0.05, "{}", shape.width);
        assert!((shape.depth - 0.4).abs() < 0.02);
    }

    #[test]
    fn edge_minimum_is_not_a_dip() {
        let taus = linear_grid(0.5, 12.0, 0.1).unwrap();
        let vals: Vec<f64> = taus
            .iter()
            .map(|t| 0.95 - 0.5 * (-(t - 0.3f64).powi(2)).exp())
            .collect();
        let rep = find_dips(&taus, &vals, &DipOptions::default()).unwrap();
        assert!(rep.dip_positions.is_empty(), "{:?}", rep.dip_positions);
    }

    #[test]
    fn preconditions() {
        let taus = [1.0, 2.0, 3.0, 4.0];
        assert!(find_dips(&taus, &[1.0; 4], &DipOptions::default()).is_err());
        let taus = [1.0, 2.0, 2.0, 4.0, 5.0];
        assert!(find_dips(&taus, &[1.0; 5], &DipOptions::default()).is_err());
    }
}
