use num_complex::Complex64;

use crate::error::{check_range, Error, Result};
use crate::qcore::{
    kron, path_selector, pauli_x, pauli_y, pauli_z, spin_z_projector, ElementChannel, Op2, Op4,
    Path, Sign, SpinPathState,
};

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn spin_op(m: &Op2) -> Op4 {
    kron(m, &Op2::identity())
}

fn rotation_x(angle: f64) -> Op2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let mis = Complex64::new(0.0, -s);
    Op2::new(real(c), mis, mis, real(c))
}

fn rotation_z(angle: f64) -> Op2 {
    Op2::new(
        Complex64::from_polar(1.0, -angle / 2.0),
        real(0.0),
        real(0.0),
        Complex64::from_polar(1.0, angle / 2.0),
    )
}

/// DC spin turner: rotation of the spin about x by `angle`, performed with
/// probability `efficiency` and skipped otherwise.
///
/// For `angle = π` acting on a spin-up beam the spin-down population equals
/// `efficiency`.
pub fn make_spin_turner(angle: f64, efficiency: f64) -> Result<ElementChannel> {
    check_range("spin_turner.efficiency", efficiency, 0.0, 1.0, "[0, 1]")?;
    let rot = spin_op(&rotation_x(angle)) * real(efficiency.sqrt());
    let idle = Op4::identity() * real((1.0 - efficiency).sqrt());
    ElementChannel::new(
        format!("spin_turner({angle:.6}, {efficiency})"),
        vec![rot, idle],
    )
}

/// Larmor accelerator in one path: spin precession about the guide field by
/// `angle`, controlled on the neutron travelling through `path`.
pub fn make_larmor_accelerator(angle: f64, path: Path) -> ElementChannel {
    let on = path_selector(path);
    let off = path_selector(path.other());
    let u = spin_op(&rotation_z(angle)) * on + off;
    ElementChannel::unitary(format!("larmor({angle:.6}, {path:?})"), u)
        .expect("controlled rotation is unitary")
}

/// Phase factor `e^{iφ}` on one path.
pub fn make_path_phase(path: Path, phase: f64) -> ElementChannel {
    let mut diag = Op2::identity();
    diag[(path.index(), path.index())] = Complex64::from_polar(1.0, phase);
    ElementChannel::unitary(
        format!("path_phase({phase:.6}, {path:?})"),
        kron(&Op2::identity(), &diag),
    )
    .expect("diagonal phase is unitary")
}

/// Phase shifter: `e^{iχ}` on path II relative to path I.
pub fn make_phase_shifter(chi: f64) -> ElementChannel {
    make_path_phase(Path::II, chi)
}

/// Phenomenological contrast loss: path coherences are multiplied by
/// `contrast`, path populations are untouched.
pub fn make_path_dephasing(contrast: f64) -> Result<ElementChannel> {
    check_range("contrast", contrast, 0.0, 1.0, "[0, 1]")?;
    let z = kron(&Op2::identity(), &pauli_z());
    ElementChannel::new(
        format!("path_dephasing({contrast})"),
        vec![
            Op4::identity() * real(((1.0 + contrast) / 2.0).sqrt()),
            z * real(((1.0 - contrast) / 2.0).sqrt()),
        ],
    )
}

/// Isotropic spin depolarization: the spin Bloch vector is scaled by
/// `polarization`.
pub fn make_spin_depolarizer(polarization: f64) -> Result<ElementChannel> {
    check_range("polarization", polarization, 0.0, 1.0, "[0, 1]")?;
    let w0 = ((1.0 + 3.0 * polarization) / 4.0).sqrt();
    let w = ((1.0 - polarization) / 4.0).sqrt();
    ElementChannel::new(
        format!("spin_depolarizer({polarization})"),
        vec![
            Op4::identity() * real(w0),
            spin_op(&pauli_x()) * real(w),
            spin_op(&pauli_y()) * real(w),
            spin_op(&pauli_z()) * real(w),
        ],
    )
}

/// Ideal beam stopper in the other path: the state is projected onto `open`
/// and renormalized. Returns the post-stopper state and the transmitted
/// fraction of the intensity.
pub fn block_path(state: &SpinPathState, open: Path) -> Result<(SpinPathState, f64)> {
    let p = path_selector(open);
    let projected = p * state.rho() * p;
    let transmission = projected.trace().re;
    if transmission <= 0.0 {
        return Err(Error::Undefined(format!(
            "no intensity left in path {open:?} after blocking"
        )));
    }
    let rho = projected / real(transmission);
    Ok((SpinPathState::new(rho)?, transmission))
}

/// Spin analyzer transmitting spin-up with probability `(1 + efficiency)/2`
/// and spin-down with `(1 − efficiency)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinAnalyzer {
    pub efficiency: f64,
}

impl SpinAnalyzer {
    pub fn new(efficiency: f64) -> Result<Self> {
        check_range("analyzer_efficiency", efficiency, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { efficiency })
    }

    pub fn transmission(&self, state: &SpinPathState) -> f64 {
        let a = self.efficiency;
        let povm = spin_z_projector(Sign::Plus) * real((1.0 + a) / 2.0)
            + spin_z_projector(Sign::Minus) * real((1.0 - a) / 2.0);
        state.expectation(&povm)
    }
}
