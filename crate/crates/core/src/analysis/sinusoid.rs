use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::fringe::wrap_phase;
use super::lsq::{minimize, poisson_weights, LsqModel, LsqOptions};
use crate::error::{Error, Result};

/// `y = O + A·cos(k·x + φ)` with parameters `[O, A, k, φ]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SinusoidModel;

impl LsqModel for SinusoidModel {
    fn n_params(&self) -> usize {
        4
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * (p[2] * x + p[3]).cos()
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        let (s, c) = (p[2] * x + p[3]).sin_cos();
        out[0] = 1.0;
        out[1] = c;
        out[2] = -p[1] * x * s;
        out[3] = -p[1] * s;
    }

    fn magnitude(&self, _x: f64, p: &[f64]) -> f64 {
        p[0].abs() + p[1].abs()
    }
}

/// Sinusoid fit with free angular frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    /// rad per unit of x.
    pub frequency: f64,
    pub phase: f64,
    /// Covariance of `[offset, amplitude, frequency, phase]`.
    pub covariance: [[f64; 4]; 4],
    pub chi_square: f64,
    pub dof: usize,
}

impl SinusoidFit {
    pub fn frequency_sigma(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    /// Step in x that advances the phase by π/2, with its uncertainty.
    pub fn quarter_period(&self) -> (f64, f64) {
        let k = self.frequency;
        (PI / 2.0 / k, PI / 2.0 * self.frequency_sigma() / (k * k))
    }
}

/// Weighted linear fit of `[1, cos kx, sin kx]` at fixed k; returns χ² and
/// the coefficients.
fn linear_at(k: f64, xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<(f64, Vector3<f64>)> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let f = Vector3::new(1.0, (k * x).cos(), (k * x).sin());
        a += w * f * f.transpose();
        b += w * y * f;
    }
    let coef = a.cholesky()?.solve(&b);
    let chi2 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((&x, &y), &w)| {
            let r = y - coef[0] - coef[1] * (k * x).cos() - coef[2] * (k * x).sin();
            w * r * r
        })
        .sum();
    Some((chi2, coef))
}

/// Fits `O + A·cos(k·x + φ)` with Poisson weights. The starting frequency is
/// the best of a dense scan from a quarter period over the data span up to
/// the Nyquist frequency of the sampling.
pub fn fit_sinusoid(xs: &[f64], ys: &[f64]) -> Result<SinusoidFit> {
    if xs.len() != ys.len() || xs.len() < 6 {
        return Err(Error::InvalidInput(
            "sinusoid fit needs at least 6 points with matching lengths".into(),
        ));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let span = sorted[sorted.len() - 1] - sorted[0];
    let min_step = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !min_step.is_finite() {
        return Err(Error::InvalidInput(
            "sinusoid fit needs distinct abscissae".into(),
        ));
    }
    let weights = poisson_weights(ys);
    let k_lo = 0.25 * TAU / span;
    let k_hi = PI / min_step;
    let steps = (((k_hi - k_lo) / (0.02 * TAU / span)).ceil() as usize).clamp(10, 20_000);
    let mut best: Option<(f64, f64, Vector3<f64>)> = None;
    for i in 0..=steps {
        let k = k_lo + (k_hi - k_lo) * i as f64 / steps as f64;
        if let Some((chi2, coef)) = linear_at(k, xs, ys, &weights) {
            if best.as_ref().is_none_or(|b| chi2 < b.0) {
                best = Some((chi2, k, coef));
            }
        }
    }
    let (_, k0, coef) =
        best.ok_or_else(|| Error::FitFailed("frequency scan found no solution".into()))?;
    // O + a cos kx + b sin kx = O + A cos(kx + φ) with a = A cos φ, b = −A sin φ
    let amp = coef[1].hypot(coef[2]);
    let phi = (-coef[2]).atan2(coef[1]);
    let p0 = [coef[0], amp, k0, phi];
    let sol = minimize(
        &SinusoidModel,
        xs,
        ys,
        &weights,
        &p0,
        &LsqOptions::default(),
    )?;

    let mut p = [sol.params[0], sol.params[1], sol.params[2], sol.params[3]];
    let mut cov = [[0.0; 4]; 4];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = sol.covariance[(i, j)];
        }
    }
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[3] += PI;
        for k in [0, 2, 3] {
            cov[1][k] = -cov[1][k];
            cov[k][1] = -cov[k][1];
        }
    }
    if p[2] < 0.0 {
        // cos(−kx − φ) = cos(kx + φ)
        p[2] = -p[2];
        p[3] = -p[3];
        for k in [0, 1] {
            cov[2][k] = -cov[2][k];
            cov[k][2] = -cov[k][2];
            cov[3][k] = -cov[3][k];
            cov[k][3] = -cov[k][3];
        }
    }
    Ok(SinusoidFit {
        offset: p[0],
        amplitude: p[1],
        frequency: p[2],
        phase: wrap_phase(p[3]),
        covariance: cov,
        chi_square: sol.chi_square,
        dof: xs.len() - 4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_frequency_noiseless() {
        let xs: Vec<f64> = (0..57).map(|i| -2.8 + 0.1 * i as f64).collect();
        let k = std::f64::consts::FRAC_PI_2 / 0.7;
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| 1000.0 * (1.0 + (k * x + 0.2).cos()))
            .collect();
        let fit = fit_sinusoid(&xs, &ys).unwrap();
        assert!((fit.frequency / k - 1.0).abs() < 1e-9, "{}", fit.frequency);
        assert!((fit.phase - 0.2).abs() < 1e-8);
        assert!((fit.amplitude - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = [10.0, 3.0, 2.2, -0.4];
        for &x in &[-1.3, 0.0, 0.7, 2.9] {
            let mut g = [0.0; 4];
            SinusoidModel.gradient(x, &p, &mut g);
            for j in 0..4 {
                let h = 1e-6;
                let mut hi = p;
                let mut lo = p;
                hi[j] += h;
                lo[j] -= h;
                let fd = (SinusoidModel.value(x, &hi) - SinusoidModel.value(x, &lo)) / (2.0 * h);
                assert!((fd - g[j]).abs() / g[j].abs().max(1.0) < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_sinusoid(&[1.0; 8], &[1.0; 8]).is_err());
        assert!(fit_sinusoid(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
