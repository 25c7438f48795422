use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::fringes::{fringe_state, measure_fringe_point};
use super::plan::{phase_grid, ScanKind, ScanPlan, ScanRecord};
use crate::analysis::{fit_fringe, FringeFit};
use crate::apparatus::ThermalModel;
use crate::counting::{CountRecord, CountingSetup, RngSeed};
use crate::error::{check_positive, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureConfig {
    pub thermal: ThermalModel,
    /// °C, in scan order.
    pub temperatures: Vec<f64>,
    pub chi_points: usize,
    pub base_rate: f64,
    pub counting: CountingSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperaturePoint {
    pub temperature: f64,
    pub fit: FringeFit,
    /// Fitted phase made continuous along the scan.
    pub unwrapped_phase: f64,
    pub model_contrast: f64,
    pub model_phase: f64,
}

/// Weighted straight-line fit of the unwrapped phases against temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDrift {
    /// rad/°C.
    pub slope: f64,
    pub slope_sigma: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureRun {
    pub plan: ScanPlan,
    pub records: Vec<ScanRecord>,
    pub points: Vec<TemperaturePoint>,
    /// `None` when fewer than two distinct temperatures were scanned.
    pub drift: Option<PhaseDrift>,
}

/// Removes 2π jumps between consecutive phases.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    for &p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => {
                let step = (p - prev + PI).rem_euclid(TAU) - PI;
                out.push(prev + step);
            }
        }
    }
    out
}

/// Weighted least-squares line `y = a + b·x` with weights `1/σ²`.
pub fn fit_line(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<PhaseDrift> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&x, &y), &s) in xs.iter().zip(ys).zip(sigmas) {
        if !(s > 0.0) {
            return Err(Error::InvalidInput(
                "line fit needs positive uncertainties".into(),
            ));
        }
        let w = 1.0 / (s * s);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 0.0) {
        return Err(Error::InvalidInput(
            "line fit needs two distinct abscissae".into(),
        ));
    }
    Ok(PhaseDrift {
        slope: (sw * sxy - sx * sy) / det,
        slope_sigma: (sw / det).sqrt(),
        intercept: (sxx * sy - sx * sxy) / det,
    })
}

/// Unwrapped fringe phases of `(temperature, fit)` pairs in scan order and
/// the weighted line through them; the line is `None` when fewer than two
/// distinct temperatures were scanned.
pub fn phase_drift(fits: &[(f64, FringeFit)]) -> Result<(Vec<f64>, Option<PhaseDrift>)> {
    let unwrapped = unwrap_phases(&fits.iter().map(|(_, f)| f.phase).collect::<Vec<_>>());
    let ts: Vec<f64> = fits.iter().map(|(t, _)| *t).collect();
    let distinct = ts.iter().any(|&t| t != ts[0]);
    let drift = if distinct {
        let sig: Vec<f64> = fits.iter().map(|(_, f)| f.phase_sigma()).collect();
        Some(fit_line(&ts, &unwrapped, &sig)?)
    } else {
        None
    };
    Ok((unwrapped, drift))
}

/// Fringe scan at each temperature. Contrast follows the thermal anchors and
/// the fringe phase drifts linearly from the reference temperature.
pub fn run_temperature_scan(config: &TemperatureConfig, seed: RngSeed) -> Result<TemperatureRun> {
    check_positive("base_rate", config.base_rate)?;
    let chis = phase_grid(config.chi_points);
    let grid: Vec<Vec<f64>> = config
        .temperatures
        .iter()
        .flat_map(|&t| chis.iter().map(move |&c| vec![t, c]))
        .collect();
    let plan = ScanPlan::new(
        ScanKind::Temperature,
        grid,
        config.counting.integration_time,
        seed,
    )?;
    let records = plan.execute(|p, s| {
        let contrast = config.thermal.contrast_at(p[0])?;
        let state = fringe_state(contrast, config.thermal.phase_shift(p[0]))?;
        measure_fringe_point(&state, p, p[1], config.base_rate, &config.counting, s)
    })?;

    let fits: Vec<(f64, FringeFit)> = records
        .chunks(chis.len())
        .map(|rows| {
            let recs: Vec<CountRecord> = rows.iter().map(|r| r.record).collect();
            Ok((rows[0].coordinates[0], fit_fringe(&recs)?))
        })
        .collect::<Result<_>>()?;
    let (unwrapped, drift) = phase_drift(&fits)?;
    let points: Vec<TemperaturePoint> = fits
        .iter()
        .zip(&unwrapped)
        .map(|(&(t, fit), &u)| {
            Ok(TemperaturePoint {
                temperature: t,
                fit,
                unwrapped_phase: u,
                model_contrast: config.thermal.contrast_at(t)?,
                model_phase: config.thermal.phase_shift(t),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TemperatureRun {
        plan,
        records,
        points,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procedures::linear_grid;

    fn config(temperatures: Vec<f64>) -> TemperatureConfig {
        TemperatureConfig {
            thermal: ThermalModel::default(),
            temperatures,
            chi_points: 16,
            base_rate: 50.0,
            counting: CountingSetup::new(0.99, 150.0, true).unwrap(),
        }
    }

    #[test]
    fn reference_temperature_contrast() {
        let run = run_temperature_scan(&config(vec![25.2]), RngSeed(8)).unwrap();
        let f = run.points[0].fit;
        assert!((f.contrast - 0.88).abs() < 3.0 * f.contrast_sigma());
        assert!(run.drift.is_none());
    }

    #[test]
    fn phase_slope_over_full_range() {
        let temps = linear_grid(25.2, 26.8, 0.2).unwrap();
        let run = run_temperature_scan(&config(temps), RngSeed(9)).unwrap();
        let d = run.drift.unwrap();
        assert!((d.slope - 1.92).abs() < 0.05, "{d:?}");
        for p in &run.points {
            assert!((p.fit.contrast - p.model_contrast).abs() < 4.0 * p.fit.contrast_sigma());
        }
    }

    #[test]
    fn constant_temperature_has_no_drift() {
        let run = run_temperature_scan(&config(vec![25.8; 6]), RngSeed(10)).unwrap();
        let phases: Vec<f64> = run.points.iter().map(|p| p.unwrapped_phase).collect();
        let sig = run.points[0].fit.phase_sigma();
        for p in &phases {
            assert!((p - phases[0]).abs() < 5.0 * sig);
        }
        let xs: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let sigmas: Vec<f64> = run.points.iter().map(|p| p.fit.phase_sigma()).collect();
        let line = fit_line(&xs, &phases, &sigmas).unwrap();
        assert!(line.slope.abs() < 3.0 * line.slope_sigma);
    }

    #[test]
    fn out_of_range_temperature() {
        assert!(run_temperature_scan(&config(vec![30.0]), RngSeed(0)).is_err());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let u = unwrap_phases(&[3.0, -3.0, -2.0]);
        assert!((u[1] - (TAU - 3.0)).abs() < 1e-12);
        assert!((u[2] - (TAU - 2.0)).abs() < 1e-12);
    }
}
