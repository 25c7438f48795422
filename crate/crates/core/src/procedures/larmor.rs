use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::plan::{ScanKind, ScanPlan, ScanRecord};
use crate::analysis::{fit_sinusoid, SinusoidFit};
use crate::apparatus::{
    block_path, larmor_angle, make_larmor_accelerator, make_spin_turner, BeamParameters, LarmorCoil,
};
use crate::counting::{expected_spin_rate, recorded_value, CountingSetup, Detector, RngSeed};
use crate::error::{check_positive, Result};
use crate::qcore::{JointSetting, Ket4, Path, SpinPathState};

/// Analyzer azimuth matching the spin after the π/2 turner, so that the
/// count rate is maximal at zero coil current.
const ANALYZER_ALPHA: f64 = -FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarmorConfig {
    pub beam: BeamParameters,
    pub coil: LarmorCoil,
    /// Path holding the coil under test; the other path is blocked.
    pub path: Path,
    /// A, in scan order.
    pub currents: Vec<f64>,
    pub base_rate: f64,
    pub counting: CountingSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LarmorRun {
    pub plan: ScanPlan,
    pub records: Vec<ScanRecord>,
    /// Intensity fraction passing the beam stopper.
    pub transmission: f64,
    /// Counts versus current.
    pub fit: SinusoidFit,
    /// Current rotating the spin by π/2, A.
    pub amps_per_half_pi: f64,
    pub amps_per_half_pi_sigma: f64,
}

/// Spin turned into the precession plane with the path `open` selected.
/// Returns the state behind the stopper and the transmitted fraction.
pub fn calibration_state(open: Path) -> Result<(SpinPathState, f64)> {
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let input = SpinPathState::from_ket(&Ket4::new(a, a, zero, zero))?;
    let turned = make_spin_turner(FRAC_PI_2, 1.0)?.apply(&input);
    block_path(&turned, open)
}

/// Scans the coil current with the other path blocked and fits the
/// spin-analyzed intensity `O + A·cos(k·I + φ)`; π/2 takes `(π/2)/k` amperes.
pub fn run_larmor_calibration(config: &LarmorConfig, seed: RngSeed) -> Result<LarmorRun> {
    check_positive("base_rate", config.base_rate)?;
    let (state, transmission) = calibration_state(config.path)?;
    let grid = config.currents.iter().map(|&i| vec![i]).collect();
    let plan = ScanPlan::new(
        ScanKind::LarmorCalibration,
        grid,
        config.counting.integration_time,
        seed,
    )?;
    let records = plan.execute(|p, s| {
        let angle = larmor_angle(&config.coil.with_current(p[0]), &config.beam);
        let rotated = make_larmor_accelerator(angle, config.path).apply(&state);
        let rate = expected_spin_rate(
            &rotated,
            ANALYZER_ALPHA,
            config.base_rate * transmission,
            1.0,
        );
        Ok(ScanRecord {
            coordinates: p.to_vec(),
            record: config.counting.measure(
                JointSetting::new(recorded_value(ANALYZER_ALPHA), 0.0),
                Detector::O,
                rate,
                s,
            )?,
        })
    })?;
    let xs: Vec<f64> = records.iter().map(|r| r.coordinates[0]).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.record.counts()).collect();
    let fit = fit_sinusoid(&xs, &ys)?;
    let (amps_per_half_pi, amps_per_half_pi_sigma) = fit.quarter_period();
    Ok(LarmorRun {
        plan,
        records,
        transmission,
        fit,
        amps_per_half_pi,
        amps_per_half_pi_sigma,
    })
}
