use serde::{Deserialize, Serialize};

use super::plan::{ScanKind, ScanPlan, ScanRecord};
use crate::analysis::{fit_gaussian_peaks, PeakFit};
use crate::apparatus::{broadened_peak, rocking_curve, CoilKind, Monochromator, RockingPeak};
use crate::counting::{CountingSetup, Detector, RngSeed};
use crate::error::{check_positive, Error, Result};
use crate::qcore::JointSetting;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockingConfig {
    pub monochromator: Monochromator,
    pub coil: CoilKind,
    /// Adds a second peak of equal height at `center + separation`, as for
    /// the two spin components split by the magnetic prisms.
    pub double_peak: bool,
    /// rad.
    pub separation: f64,
    /// Neutrons/s at the top of an unbroadened peak.
    pub peak_rate: f64,
    /// Neutrons/s off the peaks.
    pub background_rate: f64,
    /// Crystal angles, rad.
    pub angles: Vec<f64>,
    pub counting: CountingSetup,
}

impl RockingConfig {
    /// Peaks the scan is simulated from.
    pub fn peaks(&self) -> Result<Vec<RockingPeak>> {
        let base = RockingPeak::new(0.0, self.monochromator.fwhm(), self.peak_rate)?;
        let first = broadened_peak(&base, self.coil);
        let mut peaks = vec![first];
        if self.double_peak {
            check_positive("separation", self.separation)?;
            peaks.push(RockingPeak {
                center: first.center + self.separation,
                ..first
            });
        }
        Ok(peaks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockingRun {
    pub plan: ScanPlan,
    pub records: Vec<ScanRecord>,
    pub true_peaks: Vec<RockingPeak>,
    pub fit: PeakFit,
}

/// Counts the rocking curve plus a flat background at each angle and fits
/// one Gaussian per configured peak.
pub fn run_rocking_scan(config: &RockingConfig, seed: RngSeed) -> Result<RockingRun> {
    check_positive("peak_rate", config.peak_rate)?;
    if !(config.background_rate.is_finite() && config.background_rate >= 0.0) {
        return Err(Error::OutOfRange {
            name: "background_rate",
            value: config.background_rate,
            range: "[0, inf)",
        });
    }
    let true_peaks = config.peaks()?;
    let grid = config.angles.iter().map(|&a| vec![a]).collect();
    let plan = ScanPlan::new(
        ScanKind::Rocking,
        grid,
        config.counting.integration_time,
        seed,
    )?;
    let records = plan.execute(|p, s| {
        let rate = rocking_curve(&true_peaks, &[p[0]])[0] + config.background_rate;
        Ok(ScanRecord {
            coordinates: p.to_vec(),
            record: config
                .counting
                .measure(JointSetting::new(0.0, 0.0), Detector::O, rate, s)?,
        })
    })?;
    let xs: Vec<f64> = records.iter().map(|r| r.coordinates[0]).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.record.counts()).collect();
    let fit = fit_gaussian_peaks(&xs, &ys, true_peaks.len())?;
    Ok(RockingRun {
        plan,
        records,
        true_peaks,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedures::linear_grid;

    fn config(mono: Monochromator, coil: CoilKind, double_peak: bool) -> RockingConfig {
        RockingConfig {
            monochromator: mono,
            coil,
            double_peak,
            separation: 2.3e-5,
            peak_rate: 200.0,
            background_rate: 2.0,
            angles: linear_grid(-3e-5, 5e-5, 5e-7).unwrap(),
            counting: CountingSetup::new(0.99, 20.0, true).unwrap(),
        }
    }

    #[test]
    fn single_fold_width() {
        let run = run_rocking_scan(
            &config(Monochromator::SingleFold, CoilKind::NoCoil, false),
            RngSeed(1),
        )
        .unwrap();
        let p = run.fit.peaks[0];
        assert!((p.fwhm - 6.11e-6).abs() < 3.0 * p.fwhm_sigma, "{p:?}");
        assert!(p.fwhm_sigma < Monochromator::SingleFold.fwhm_uncertainty());
    }

    #[test]
    fn broadening_applied() {
        let cfg = config(Monochromator::TripleFold, CoilKind::AlWire, false);
        let peaks = cfg.peaks().unwrap();
        assert_eq!(peaks[0].fwhm, 4.26e-6 * 1.68);
        assert_eq!(peaks[0].height, 200.0 * 0.56);
        let run = run_rocking_scan(&cfg, RngSeed(2)).unwrap();
        let p = run.fit.peaks[0];
        assert!((p.fwhm - 4.26e-6 * 1.68).abs() < 3.0 * p.fwhm_sigma);
    }

    #[test]
    fn double_peak_separation() {
        let run = run_rocking_scan(
            &config(Monochromator::TripleFold, CoilKind::NoCoil, true),
            RngSeed(3),
        )
        .unwrap();
        let (a, b) = (run.fit.peaks[0], run.fit.peaks[1]);
        let sep = b.center - a.center;
        let sigma = a.center_sigma.hypot(b.center_sigma);
        assert!((sep - 2.3e-5).abs() < 3.0 * sigma, "{sep} ± {sigma}");
    }
}
