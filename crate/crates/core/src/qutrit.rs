//! Dense three-level linear algebra in the `(|+1⟩, |0⟩, |−1⟩)` basis.
//!
//! States and operators are always stored in the spin-projection basis. The
//! bright/dark frame `(|+⟩, |0⟩, |−⟩)` with `|±⟩ = (|+1⟩ ± |−1⟩)/√2` is only
//! ever produced as a view (see [`bright_dark_transform`] and [`populations`]).

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Mul;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;
pub type Vec3 = Vector3<C64>;

pub const STATE_NORM_TOL: f64 = 1e-12;
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-12;
pub const DENSITY_TRACE_TOL: f64 = 1e-12;
pub const DENSITY_EIGEN_TOL: f64 = 1e-10;
pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Basis index of `|+1⟩`.
pub const PLUS_ONE: usize = 0;
/// Basis index of the ancilla `|0⟩`.
pub const ANCILLA: usize = 1;
/// Basis index of `|−1⟩`.
pub const MINUS_ONE: usize = 2;

/// Largest absolute entry of `a - a†`.
pub(crate) fn hermiticity_error(a: &Mat3) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub(crate) fn max_abs(a: &Mat3) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Unitary change of basis whose rows are `⟨+|, ⟨0|, ⟨−|` written in the
/// spin-projection basis. It is real, symmetric and its own inverse.
fn bright_dark_matrix() -> Mat3 {
    let s = c(FRAC_1_SQRT_2);
    Mat3::new(s, ZERO, s, ZERO, ONE, ZERO, s, ZERO, -s)
}

/// Pure qutrit state, normalized on construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector {
    amps: Vec3,
}

impl StateVector {
    /// Builds a state from amplitudes on `(|+1⟩, |0⟩, |−1⟩)`, normalizing them.
    pub fn new(amplitudes: [C64; 3]) -> Result<Self> {
        let amps = Vec3::from(amplitudes);
        let norm = amps.norm();
        if !norm.is_finite() || norm < 1e-150 {
            return Err(Error::InvalidState(format!("cannot normalize state with norm {norm}")));
        }
        Ok(Self {
            amps: amps.unscale(norm),
        })
    }

    pub(crate) fn from_vector_unchecked(amps: Vec3) -> Self {
        Self { amps }
    }

    pub fn basis(index: usize) -> Self {
        let mut amps = Vec3::zeros();
        amps[index] = ONE;
        Self { amps }
    }

    pub fn plus_one() -> Self {
        Self::basis(PLUS_ONE)
    }

    pub fn ancilla() -> Self {
        Self::basis(ANCILLA)
    }

    pub fn minus_one() -> Self {
        Self::basis(MINUS_ONE)
    }

    /// Bright state `|+⟩ = (|+1⟩ + |−1⟩)/√2`.
    pub fn bright() -> Self {
        Self::from_bright_dark(BrightDark([ONE, ZERO, ZERO]))
    }

    /// Dark state `|−⟩ = (|+1⟩ − |−1⟩)/√2`.
    pub fn dark() -> Self {
        Self::from_bright_dark(BrightDark([ZERO, ZERO, ONE]))
    }

    /// Inverse of [`bright_dark_transform`].
    pub fn from_bright_dark(view: BrightDark) -> Self {
        Self {
            amps: bright_dark_matrix() * Vec3::from(view.0),
        }
    }

    pub fn amplitudes(&self) -> [C64; 3] {
        [self.amps[0], self.amps[1], self.amps[2]]
    }

    pub fn as_vector(&self) -> &Vec3 {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            matrix: self.amps * self.amps.adjoint(),
        }
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap_sqr(&self, other: &StateVector) -> f64 {
        self.amps.dotc(&other.amps).norm_sqr()
    }
}

/// Amplitudes of a state on the ordered bright/dark basis `(|+⟩, |0⟩, |−⟩)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BrightDark(pub [C64; 3]);

impl BrightDark {
    pub fn bright(&self) -> C64 {
        self.0[0]
    }

    pub fn ancilla(&self) -> C64 {
        self.0[1]
    }

    pub fn dark(&self) -> C64 {
        self.0[2]
    }
}

/// Expresses `v` in the `(|+⟩, |0⟩, |−⟩)` basis.
pub fn bright_dark_transform(v: &StateVector) -> BrightDark {
    let w = bright_dark_matrix() * v.amps;
    BrightDark([w[0], w[1], w[2]])
}

/// Mixed qutrit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: Mat3,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: Mat3) -> Result<Self> {
        let rho = Self { matrix };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(matrix: Mat3) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            matrix: Mat3::identity().map(|z| z / 3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_error(&self.matrix);
        if !(herm <= DENSITY_HERMITIAN_TOL) {
            return Err(Error::InvalidState(format!(
                "density operator not hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = self.matrix.trace();
        if !((tr.re - 1.0).abs() <= DENSITY_TRACE_TOL && tr.im.abs() <= DENSITY_TRACE_TOL) {
            return Err(Error::InvalidState(format!(
                "density operator trace {tr} differs from 1"
            )));
        }
        let lowest = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if lowest < -DENSITY_EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "density operator has negative eigenvalue {lowest:.3e}"
            )));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        let eig = SymmetricEigen::new(hermitian_part(&self.matrix)).eigenvalues;
        [eig[0], eig[1], eig[2]]
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }
}

impl From<StateVector> for DensityOperator {
    fn from(v: StateVector) -> Self {
        v.to_density()
    }
}

pub(crate) fn hermitian_part(a: &Mat3) -> Mat3 {
    (a + a.adjoint()).map(|z| z * 0.5)
}

/// General 3×3 complex operator. Hamiltonians are in rad/µs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operator3(pub Mat3);

impl Operator3 {
    pub fn zeros() -> Self {
        Self(Mat3::zeros())
    }

    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    pub fn from_real_rows(rows: [[f64; 3]; 3]) -> Self {
        Self(Mat3::from_fn(|i, j| c(rows[i][j])))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0.map(|z| z * k))
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `max |(U†U − I)_ij|`.
    pub fn unitarity_error(&self) -> f64 {
        max_abs(&(self.0.adjoint() * self.0 - Mat3::identity()))
    }

    /// Matrix elements in the bright/dark basis: `B A B†`.
    pub fn in_bright_dark(&self) -> Mat3 {
        let b = bright_dark_matrix();
        b * self.0 * b.adjoint()
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        StateVector::from_vector_unchecked(self.0 * v.amps)
    }

    /// `A ρ A†`.
    pub fn conjugate(&self, rho: &DensityOperator) -> DensityOperator {
        DensityOperator::from_matrix_unchecked(self.0 * rho.matrix * self.0.adjoint())
    }

    pub fn commutator(&self, other: &Operator3) -> Operator3 {
        Operator3(self.0 * other.0 - other.0 * self.0)
    }

    pub fn powi(&self, n: u32) -> Operator3 {
        let mut acc = Mat3::identity();
        let mut base = self.0;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            k >>= 1;
        }
        Operator3(acc)
    }
}

impl Mul for Operator3 {
    type Output = Operator3;

    fn mul(self, rhs: Operator3) -> Operator3 {
        Operator3(self.0 * rhs.0)
    }
}

impl std::ops::Add for Operator3 {
    type Output = Operator3;

    fn add(self, rhs: Operator3) -> Operator3 {
        Operator3(self.0 + rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Spin-1 angular momentum matrices in the `(|+1⟩, |0⟩, |−1⟩)` basis.
pub fn spin_operator(axis: Axis) -> Operator3 {
    let s = FRAC_1_SQRT_2;
    match axis {
        Axis::X => Operator3::from_real_rows([[0.0, s, 0.0], [s, 0.0, s], [0.0, s, 0.0]]),
        Axis::Y => {
            let a = C64::new(0.0, -s);
            let b = C64::new(0.0, s);
            Operator3(Mat3::new(ZERO, a, ZERO, b, ZERO, a, ZERO, b, ZERO))
        }
        Axis::Z => Operator3::from_real_rows([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -1.0]]),
    }
}

/// `exp(−i H t)` for Hermitian `H` (rad/µs) and `t ≥ 0` (µs), built from the
/// eigendecomposition of `H`.
pub fn propagator(h: &Operator3, t: f64) -> Result<Operator3> {
    let scale = max_abs(&h.0).max(1.0);
    let herm = h.hermiticity_error();
    if !(herm <= HAMILTONIAN_HERMITIAN_TOL * scale) {
        return Err(Error::NonHermitian(herm));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(crate::error::invalid(
            "t",
            format!("time must be finite and >= 0, got {t}"),
        ));
    }
    Ok(propagator_unchecked(h, t))
}

pub(crate) fn propagator_unchecked(h: &Operator3, t: f64) -> Operator3 {
    if t == 0.0 {
        return Operator3::identity();
    }
    let eig = SymmetricEigen::new(hermitian_part(&h.0));
    let v = eig.eigenvectors;
    let phases = Mat3::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    Operator3(v * phases * v.adjoint())
}

/// `Tr(ρ_exp ρ_theo)` for two valid density operators.
pub fn state_fidelity(rho_exp: &DensityOperator, rho_theo: &DensityOperator) -> Result<f64> {
    rho_exp.validate()?;
    rho_theo.validate()?;
    Ok(overlap(rho_exp, rho_theo))
}

pub(crate) fn overlap(a: &DensityOperator, b: &DensityOperator) -> f64 {
    (a.matrix * b.matrix).trace().re
}

/// Populations in the bright/dark frame. `zero` is the population leaked out
/// of the qubit space into the ancilla.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Populations {
    pub plus: f64,
    pub zero: f64,
    pub minus: f64,
}

impl Populations {
    pub fn sum(&self) -> f64 {
        self.plus + self.zero + self.minus
    }
}

/// Anything whose bright/dark-frame populations can be read.
pub trait QutritState {
    fn bright_dark_populations(&self) -> Populations;
}

impl QutritState for StateVector {
    fn bright_dark_populations(&self) -> Populations {
        let bd = bright_dark_transform(self);
        Populations {
            plus: bd.0[0].norm_sqr(),
            zero: bd.0[1].norm_sqr(),
            minus: bd.0[2].norm_sqr(),
        }
    }
}

impl QutritState for DensityOperator {
    fn bright_dark_populations(&self) -> Populations {
        let b = bright_dark_matrix();
        let r = b * self.matrix * b.adjoint();
        Populations {
            plus: r[(0, 0)].re,
            zero: r[(1, 1)].re,
            minus: r[(2, 2)].re,
        }
    }
}

pub fn populations<S: QutritState + ?Sized>(state: &S) -> Populations {
    state.bright_dark_populations()
}
