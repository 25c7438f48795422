//! Two-qubit (spin ⊗ path) quantum mechanics of a single neutron.
//!
//! Everything lives in the fixed four-dimensional product space with the
//! ordered basis
//!
//! | index | ket        |
//! |-------|------------|
//! | 0     | `|↑⟩⊗|I⟩`  |
//! | 1     | `|↑⟩⊗|II⟩` |
//! | 2     | `|↓⟩⊗|I⟩`  |
//! | 3     | `|↓⟩⊗|II⟩` |
//!
//! i.e. `index = 2 * spin + path`. Golden files and tests depend on this order.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Op2 = Matrix2<Complex64>;
pub type Op4 = Matrix4<Complex64>;
pub type Ket4 = Vector4<Complex64>;

/// Hermiticity and trace tolerance for exact algebra.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const EIGEN_TOL: f64 = 1e-10;
/// Trace-preservation tolerance for Kraus sets.
pub const TP_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// One of the two interferometer paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Path {
    I,
    II,
}

impl Path {
    pub fn index(self) -> usize {
        match self {
            Path::I => 0,
            Path::II => 1,
        }
    }

    pub fn other(self) -> Path {
        match self {
            Path::I => Path::II,
            Path::II => Path::I,
        }
    }
}

/// Eigenvalue label of a two-outcome measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Spin-analysis azimuth `alpha` and path phase `chi`, both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSetting {
    pub alpha: f64,
    pub chi: f64,
}

impl JointSetting {
    pub fn new(alpha: f64, chi: f64) -> Self {
        Self { alpha, chi }
    }
}

/// Kronecker product `spin ⊗ path` in the module basis order.
pub fn kron(spin: &Op2, path: &Op2) -> Op4 {
    Op4::from_fn(|r, c| spin[(r / 2, c / 2)] * path[(r % 2, c % 2)])
}

fn identity2() -> Op2 {
    Op2::identity()
}

pub fn pauli_x() -> Op2 {
    Op2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Op2 {
    Op2::new(ZERO, -Complex64::i(), Complex64::i(), ZERO)
}

pub fn pauli_z() -> Op2 {
    Op2::new(ONE, ZERO, ZERO, -ONE)
}

/// Projector onto `(|0⟩ ± e^{iφ}|1⟩)/√2` in a single two-level factor.
fn equatorial_projector(phi: f64, sign: Sign) -> Op2 {
    let s = sign.value();
    let e = Complex64::from_polar(0.5 * s, phi);
    Op2::new(
        Complex64::new(0.5, 0.0),
        e.conj(),
        e,
        Complex64::new(0.5, 0.0),
    )
}

fn basis_projector(index: usize) -> Op2 {
    let mut p = Op2::zeros();
    p[(index, index)] = ONE;
    p
}

/// Projector onto the spin state `(|↑⟩ ± e^{iα}|↓⟩)/√2`, identity on the path.
pub fn spin_projector(alpha: f64, sign: Sign) -> Op4 {
    kron(&equatorial_projector(alpha, sign), &identity2())
}

/// Projector onto the path state `(|I⟩ ± e^{iχ}|II⟩)/√2`, identity on the spin.
pub fn path_projector(chi: f64, sign: Sign) -> Op4 {
    kron(&identity2(), &equatorial_projector(chi, sign))
}

/// Projector onto spin up (`Plus`) or spin down (`Minus`) along the guide field.
pub fn spin_z_projector(sign: Sign) -> Op4 {
    let idx = match sign {
        Sign::Plus => 0,
        Sign::Minus => 1,
    };
    kron(&basis_projector(idx), &identity2())
}

/// Projector selecting one interferometer path.
pub fn path_selector(path: Path) -> Op4 {
    kron(&identity2(), &basis_projector(path.index()))
}

/// `[P(α,+) − P(α,−)] ⊗ [P(χ,+) − P(χ,−)]`.
pub fn joint_observable(setting: JointSetting) -> Op4 {
    let spin = equatorial_projector(setting.alpha, Sign::Plus)
        - equatorial_projector(setting.alpha, Sign::Minus);
    let path = equatorial_projector(setting.chi, Sign::Plus)
        - equatorial_projector(setting.chi, Sign::Minus);
    kron(&spin, &path)
}

fn max_abs(m: &Op4) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Density matrix over spin ⊗ path.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinPathState {
    rho: Op4,
}

impl SpinPathState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Op4) -> Result<Self> {
        let herm = max_abs(&(rho - rho.adjoint()));
        if herm > ALGEBRA_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > ALGEBRA_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min_eig = rho
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -EIGEN_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { rho })
    }

    /// `|ψ⟩⟨ψ|` for a ket that is normalized internally.
    pub fn from_ket(ket: &Ket4) -> Result<Self> {
        let norm = ket.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput(
                "ket has zero or non-finite norm".into(),
            ));
        }
        let k = ket / Complex64::new(norm, 0.0);
        Self::new(k * k.adjoint())
    }

    /// Product state `ρ_spin ⊗ ρ_path`.
    pub fn product(spin: &Op2, path: &Op2) -> Result<Self> {
        Self::new(kron(spin, path))
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Op4::identity() * Complex64::new(0.25, 0.0),
        }
    }

    pub(crate) fn from_raw(rho: Op4) -> Self {
        // CPTP images stay Hermitian analytically; drop roundoff asymmetry.
        let rho = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        Self { rho }
    }

    pub fn rho(&self) -> &Op4 {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.rho * self.rho).trace().re
    }

    /// `Re tr(ρ A)`.
    pub fn expectation(&self, op: &Op4) -> f64 {
        (self.rho * op).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Reduced spin density matrix (path traced out).
    pub fn reduced_spin(&self) -> Op2 {
        Op2::from_fn(|i, j| self.rho[(2 * i, 2 * j)] + self.rho[(2 * i + 1, 2 * j + 1)])
    }

    /// Reduced path density matrix (spin traced out).
    pub fn reduced_path(&self) -> Op2 {
        Op2::from_fn(|k, l| self.rho[(k, l)] + self.rho[(2 + k, 2 + l)])
    }

    /// Spin Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
    pub fn spin_bloch(&self) -> [f64; 3] {
        let r = self.reduced_spin();
        [
            (r * pauli_x()).trace().re,
            (r * pauli_y()).trace().re,
            (r * pauli_z()).trace().re,
        ]
    }

    /// Wootters concurrence; 1 for maximally entangled pure states, 0 for products.
    pub fn concurrence(&self) -> f64 {
        let yy = kron(&pauli_y(), &pauli_y());
        let rho_tilde = yy * self.rho.conjugate() * yy;
        let sqrt_rho = hermitian_sqrt(&self.rho);
        let m = sqrt_rho * rho_tilde * sqrt_rho;
        let m = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut lambdas: Vec<f64> = m
            .symmetric_eigenvalues()
            .iter()
            .map(|&v| v.max(0.0).sqrt())
            .collect();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
    }
}

fn hermitian_sqrt(m: &Op4) -> Op4 {
    let eig = m.symmetric_eigen();
    let d = Op4::from_diagonal(
        &eig.eigenvalues
            .map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0)),
    );
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// The entangled spin-path state `(|↑⟩⊗|I⟩ + |↓⟩⊗|II⟩)/√2` as a density matrix.
pub fn prepare_bell_state() -> SpinPathState {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let ket = Ket4::new(a, ZERO, ZERO, a);
    SpinPathState::from_raw(ket * ket.adjoint())
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementChannel {
    label: String,
    kraus: Vec<Op4>,
}

impl ElementChannel {
    /// Rejects empty or non trace-preserving Kraus sets.
    pub fn new(label: impl Into<String>, kraus: Vec<Op4>) -> Result<Self> {
        let label = label.into();
        if kraus.is_empty() {
            return Err(Error::InvalidInput(format!(
                "channel `{label}` has no Kraus operators"
            )));
        }
        let sum: Op4 = kraus.iter().map(|k| k.adjoint() * k).sum();
        let deviation = max_abs(&(sum - Op4::identity()));
        if !(deviation <= TP_TOL) {
            return Err(Error::NotTracePreserving { label, deviation });
        }
        Ok(Self { label, kraus })
    }

    pub fn identity() -> Self {
        Self {
            label: "identity".into(),
            kraus: vec![Op4::identity()],
        }
    }

    /// Unitary channel; fails if `u` is not unitary to the TP tolerance.
    pub fn unitary(label: impl Into<String>, u: Op4) -> Result<Self> {
        Self::new(label, vec![u])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kraus_ops(&self) -> &[Op4] {
        &self.kraus
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &ElementChannel) -> ElementChannel {
        let kraus = next
            .kraus
            .iter()
            .flat_map(|b| self.kraus.iter().map(move |a| b * a))
            .collect();
        ElementChannel {
            label: format!("{} -> {}", self.label, next.label),
            kraus,
        }
    }

    pub fn apply(&self, state: &SpinPathState) -> SpinPathState {
        apply_channel(state, self)
    }
}

/// `ρ → Σ K ρ K†`.
pub fn apply_channel(state: &SpinPathState, channel: &ElementChannel) -> SpinPathState {
    let rho = state.rho();
    let out: Op4 = channel.kraus.iter().map(|k| k * rho * k.adjoint()).sum();
    SpinPathState::from_raw(out)
}

/// Applies channels in order.
pub fn apply_all<'a>(
    state: &SpinPathState,
    channels: impl IntoIterator<Item = &'a ElementChannel>,
) -> SpinPathState {
    channels
        .into_iter()
        .fold(state.clone(), |s, ch| apply_channel(&s, ch))
}

/// `tr(ρ Σ_{s,p} s·p·P^S_{α,s} P^P_{χ,p})`.
pub fn joint_expectation(state: &SpinPathState, setting: JointSetting) -> f64 {
    state.expectation(&joint_observable(setting))
}

/// `tr(ρ P^S_{α,s} P^P_{χ,p})` for one of the four joint outcomes.
pub fn ideal_joint_probability(
    state: &SpinPathState,
    setting: JointSetting,
    signs: (Sign, Sign),
) -> f64 {
    let p = spin_projector(setting.alpha, signs.0) * path_projector(setting.chi, signs.1);
    state.expectation(&p)
}
