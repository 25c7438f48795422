use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::lsq::{minimize, poisson_weights, LsqModel, LsqOptions};
use crate::counting::CountRecord;
use crate::error::{Error, Result};

/// `N(χ) = O + A·cos(χ + φ)` with parameters `[O, A, φ]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FringeModel;

impl LsqModel for FringeModel {
    fn n_params(&self) -> usize {
        3
    }

    fn value(&self, chi: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * (chi + p[2]).cos()
    }

    fn gradient(&self, chi: f64, p: &[f64], out: &mut [f64]) {
        let (s, c) = (chi + p[2]).sin_cos();
        out[0] = 1.0;
        out[1] = c;
        out[2] = -p[1] * s;
    }

    fn magnitude(&self, _chi: f64, p: &[f64]) -> f64 {
        p[0].abs() + p[1].abs()
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Result of a sinusoidal fringe fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    /// rad, in `(−π, π]`.
    pub phase: f64,
    /// `amplitude / offset`.
    pub contrast: f64,
    /// Covariance of `[offset, amplitude, phase]`.
    pub covariance: [[f64; 3]; 3],
    pub chi_square: f64,
    pub dof: usize,
}

impl FringeFit {
    pub fn offset_sigma(&self) -> f64 {
        self.covariance[0][0].max(0.0).sqrt()
    }

    pub fn amplitude_sigma(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }

    pub fn phase_sigma(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    /// First-order uncertainty of `A / O`.
    pub fn contrast_sigma(&self) -> f64 {
        let (o, a) = (self.offset, self.amplitude);
        let c = &self.covariance;
        let var = c[1][1] / (o * o) + a * a * c[0][0] / o.powi(4) - 2.0 * a * c[0][1] / o.powi(3);
        var.max(0.0).sqrt()
    }

    pub fn value_at(&self, chi: f64) -> f64 {
        FringeModel.value(chi, &[self.offset, self.amplitude, self.phase])
    }
}

fn distinct_angles(chis: &[f64]) -> usize {
    let mut wrapped: Vec<f64> = chis.iter().map(|c| c.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    let mut n = 0;
    let mut last = f64::NEG_INFINITY;
    for &w in &wrapped {
        if w - last > 1e-12 {
            n += 1;
            last = w;
        }
    }
    if n > 1 && wrapped[0] + TAU - wrapped[wrapped.len() - 1] <= 1e-12 {
        n -= 1;
    }
    n
}

/// Deterministic starting point: mean, √2·RMS and the phase of the first
/// Fourier component.
fn initial_guess(chis: &[f64], counts: &[f64]) -> [f64; 3] {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let rms = (counts.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let (mut sc, mut ss) = (0.0, 0.0);
    for (&x, &y) in chis.iter().zip(counts) {
        sc += (y - mean) * x.cos();
        ss += (y - mean) * x.sin();
    }
    [mean, 2f64.sqrt() * rms, (-ss).atan2(sc)]
}

/// Weighted least-squares fit of `O + A·cos(χ + φ)` with Poisson weights
/// `1/max(N, 1)`. Requires at least five distinct phases.
pub fn fit_fringe_data(chis: &[f64], counts: &[f64]) -> Result<FringeFit> {
    if chis.len() != counts.len() {
        return Err(Error::InvalidInput(
            "phase and count lists differ in length".into(),
        ));
    }
    if counts.iter().any(|&n| !(n.is_finite() && n >= 0.0)) {
        return Err(Error::InvalidInput(
            "counts must be finite and non-negative".into(),
        ));
    }
    let distinct = distinct_angles(chis);
    if distinct < 5 {
        return Err(Error::InvalidInput(format!(
            "fringe fit needs at least 5 distinct phases, got {distinct}"
        )));
    }
    let weights = poisson_weights(counts);
    let p0 = initial_guess(chis, counts);
    let sol = minimize(
        &FringeModel,
        chis,
        counts,
        &weights,
        &p0,
        &LsqOptions::default(),
    )?;

    let (offset, mut amplitude, mut phase) = (sol.params[0], sol.params[1], sol.params[2]);
    let mut cov = [[0.0; 3]; 3];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = sol.covariance[(i, j)];
        }
    }
    if amplitude < 0.0 {
        // (A, φ) → (−A, φ + π): flip the sign of A's covariances
        amplitude = -amplitude;
        phase += PI;
        for k in [0, 2] {
            cov[1][k] = -cov[1][k];
            cov[k][1] = -cov[k][1];
        }
    }
    phase = wrap_phase(phase);
    if offset <= 0.0 {
        return Err(Error::FitFailed(format!(
            "non-positive fitted offset {offset}"
        )));
    }
    Ok(FringeFit {
        offset,
        amplitude,
        phase,
        contrast: amplitude / offset,
        covariance: cov,
        chi_square: sol.chi_square,
        dof: counts.len() - 3,
    })
}

/// Fits one fringe recorded at fixed spin analysis while scanning χ.
pub fn fit_fringe(records: &[CountRecord]) -> Result<FringeFit> {
    let chis: Vec<f64> = records.iter().map(|r| r.setting.chi).collect();
    let counts: Vec<f64> = records.iter().map(|r| r.counts()).collect();
    fit_fringe_data(&chis, &counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::{draw_counts, RngSeed};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 * TAU / n as f64).collect()
    }

    #[test]
    fn noiseless_fringe_recovered() {
        let chis = grid(16);
        let counts: Vec<f64> = chis
            .iter()
            .map(|&x| 1000.0 * (1.0 + 0.91 * (x + 0.3).cos()))
            .collect();
        let fit = fit_fringe_data(&chis, &counts).unwrap();
        assert!((fit.offset / 1000.0 - 1.0).abs() < 1e-6);
        assert!((fit.amplitude / 910.0 - 1.0).abs() < 1e-6);
        assert!((fit.phase / 0.3 - 1.0).abs() < 1e-6);
        assert!((fit.contrast - 0.91).abs() < 1e-6);
        assert_eq!(fit.dof, 13);
    }

    #[test]
    fn negative_amplitude_start_is_unwrapped() {
        let chis = grid(12);
        let counts: Vec<f64> = chis
            .iter()
            .map(|&x| 500.0 + 200.0 * (x - 3.0).cos())
            .collect();
        let fit = fit_fringe_data(&chis, &counts).unwrap();
        assert!(fit.amplitude > 0.0);
        assert!((fit.phase - wrap_phase(-3.0)).abs() < 1e-8);
        assert!(fit.phase > -PI && fit.phase <= PI);
    }

    #[test]
    fn flat_fringe_contrast_consistent_with_zero() {
        let chis = grid(16);
        let mut hits = 0;
        for t in 0..50 {
            let counts: Vec<f64> = (0..16)
                .map(|k| draw_counts(2000.0, 1.0, RngSeed(t).derive(0, k)).unwrap() as f64)
                .collect();
            let fit = fit_fringe_data(&chis, &counts).unwrap();
            if fit.contrast <= 3.0 * fit.contrast_sigma() {
                hits += 1;
            }
        }
        assert!(hits >= 48, "{hits}/50 flat fits within 3σ of zero");
    }

    #[test]
    fn noisy_contrast_coverage() {
        // 16 points × 62 500 mean counts = 10⁶ total
        let chis = grid(16);
        let truth = 0.91;
        let mut covered = 0;
        for t in 0..1000 {
            let counts: Vec<f64> = chis
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let mean = 62_500.0 * (1.0 + truth * (x + 0.3).cos());
                    draw_counts(mean, 1.0, RngSeed(99).derive(t, k as u64)).unwrap() as f64
                })
                .collect();
            let fit = fit_fringe_data(&chis, &counts).unwrap();
            if (fit.contrast - truth).abs() <= 3.0 * fit.contrast_sigma() {
                covered += 1;
            }
        }
        assert!(covered >= 990, "{covered}/1000 within 3σ");
    }

    #[test]
    fn exact_flat_fringe() {
        let chis = grid(8);
        let fit = fit_fringe_data(&chis, &[100.0; 8]).unwrap();
        assert!(fit.contrast.abs() < 1e-12);
        assert!((fit.offset - 100.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_designs_rejected() {
        let err = fit_fringe_data(&[0.5; 10], &[10.0; 10]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        let four = grid(4);
        assert!(fit_fringe_data(&four, &[1.0, 2.0, 3.0, 4.0]).is_err());
        // 0 and 2π are the same phase
        let chis = [0.0, 1.0, 2.0, 3.0, TAU];
        assert!(fit_fringe_data(&chis, &[5.0, 4.0, 3.0, 4.0, 5.0]).is_err());
        assert!(fit_fringe_data(&grid(6), &[1.0, 2.0, -3.0, 4.0, 5.0, 6.0]).is_err());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut state = 0x1234_5678_u64;
        let mut uniform = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let p = [
                100.0 + 900.0 * uniform(),
                1000.0 * uniform(),
                TAU * uniform() - PI,
            ];
            let chi = TAU * uniform();
            let mut analytic = [0.0; 3];
            FringeModel.gradient(chi, &p, &mut analytic);
            for j in 0..3 {
                let h = 1e-6 * p[j].abs().max(1.0);
                let mut hi = p;
                let mut lo = p;
                hi[j] += h;
                lo[j] -= h;
                let fd = (FringeModel.value(chi, &hi) - FringeModel.value(chi, &lo)) / (2.0 * h);
                let scale = analytic[j].abs().max(1.0);
                assert!(
                    (fd - analytic[j]).abs() / scale < 1e-6,
                    "param {j}: {fd} vs {}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
