//! Path-interference fringes without spin analysis, shared by the raster and
//! temperature scans.

use num_complex::Complex64;

use crate::apparatus::{make_path_dephasing, make_path_phase};
use crate::counting::{expected_path_rate, CountingSetup, Detector, RngSeed};
use crate::error::Result;
use crate::qcore::{apply_all, JointSetting, Ket4, Path, SpinPathState};

use super::plan::ScanRecord;

/// Spin-up neutron in the balanced path superposition, with path coherence
/// reduced to `contrast` and an extra phase `phase` on path I. Its O-detector
/// fringe is `½(1 + contrast·cos(χ + phase))`.
pub(crate) fn fringe_state(contrast: f64, phase: f64) -> Result<SpinPathState> {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let input = SpinPathState::from_ket(&Ket4::new(a, a, zero, zero))?;
    Ok(apply_all(
        &input,
        &[
            make_path_dephasing(contrast)?,
            make_path_phase(Path::I, phase),
        ],
    ))
}

/// One O-detector count of `state` at phase-shifter setting `chi`.
pub(crate) fn measure_fringe_point(
    state: &SpinPathState,
    coordinates: &[f64],
    chi: f64,
    base_rate: f64,
    counting: &CountingSetup,
    seed: RngSeed,
) -> Result<ScanRecord> {
    let rate = expected_path_rate(state, chi, Detector::O, base_rate, 1.0);
    Ok(ScanRecord {
        coordinates: coordinates.to_vec(),
        record: counting.measure(JointSetting::new(0.0, chi), Detector::O, rate, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fringe_law() {
        let s = fringe_state(0.6, 0.4).unwrap();
        for k in 0..12 {
            let chi = 0.5 * k as f64;
            let r = expected_path_rate(&s, chi, Detector::O, 1.0, 1.0);
            assert!((r - 0.5 * (1.0 + 0.6 * (chi + 0.4).cos())).abs() < 1e-12);
        }
    }
}
