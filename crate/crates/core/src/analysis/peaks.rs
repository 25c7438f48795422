use serde::{Deserialize, Serialize};

use super::lsq::{minimize, poisson_weights, LsqModel, LsqOptions};
use crate::error::{Error, Result};

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

/// Constant background plus `n` Gaussian peaks in FWHM form.
/// Parameters: `[b, h₁, c₁, w₁, h₂, c₂, w₂, …]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPeaksModel {
    pub n_peaks: usize,
}

impl LsqModel for GaussianPeaksModel {
    fn n_params(&self) -> usize {
        1 + 3 * self.n_peaks
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        p[0] + p[1..]
            .chunks_exact(3)
            .map(|q| q[0] * (-FOUR_LN2 * ((x - q[1]) / q[2]).powi(2)).exp())
            .sum::<f64>()
    }

    fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        for (q, o) in p[1..].chunks_exact(3).zip(out[1..].chunks_exact_mut(3)) {
            let (h, c, w) = (q[0], q[1], q[2]);
            let u = (x - c) / w;
            let e = (-FOUR_LN2 * u * u).exp();
            o[0] = e;
            o[1] = h * e * 2.0 * FOUR_LN2 * u / w;
            o[2] = h * e * 2.0 * FOUR_LN2 * u * u / w;
        }
    }
}

/// One fitted peak; the sigmas are one-standard-deviation fit errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedPeak {
    pub center: f64,
    pub center_sigma: f64,
    pub fwhm: f64,
    pub fwhm_sigma: f64,
    pub height: f64,
    pub height_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub background: f64,
    pub background_sigma: f64,
    /// Sorted by center.
    pub peaks: Vec<FittedPeak>,
    pub chi_square: f64,
    pub dof: usize,
}

fn smoothed(ys: &[f64]) -> Vec<f64> {
    let n = ys.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            ys[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Starting values from the `n` highest local maxima of the smoothed curve,
/// with widths from the half-maximum crossings. `xs` must be sorted.
fn initial_guess(xs: &[f64], ys: &[f64], n_peaks: usize) -> Result<Vec<f64>> {
    let s = smoothed(ys);
    let background = s.iter().copied().fold(f64::INFINITY, f64::min).max(0.0);
    let mut maxima: Vec<usize> = (0..s.len())
        .filter(|&i| (i == 0 || s[i] >= s[i - 1]) && (i + 1 == s.len() || s[i] > s[i + 1]))
        .collect();
    maxima.sort_by(|&a, &b| s[b].total_cmp(&s[a]));

    let mut p = vec![background];
    let mut taken: Vec<(f64, f64)> = Vec::new();
    for &i in &maxima {
        if taken.len() == n_peaks {
            break;
        }
        let height = s[i] - background;
        if height <= 0.0 {
            continue;
        }
        let half = background + height / 2.0;
        let mut l = i;
        while l > 0 && s[l] > half {
            l -= 1;
        }
        let mut r = i;
        while r + 1 < s.len() && s[r] > half {
            r += 1;
        }
        let min_step = xs[(i + 1).min(xs.len() - 1)] - xs[i.saturating_sub(1)];
        let width = (xs[r] - xs[l]).max(min_step);
        // a shoulder within the half-maximum region of a taller peak is not a new peak
        if taken
            .iter()
            .any(|&(c, w)| (xs[i] - c).abs() < 0.75 * w.max(width))
        {
            continue;
        }
        taken.push((xs[i], width));
        p.extend([height, xs[i], width]);
    }
    if taken.len() < n_peaks {
        return Err(Error::FitFailed(format!(
            "found {} candidate peaks, {n_peaks} requested",
            taken.len()
        )));
    }
    Ok(p)
}

/// Fits a background plus `n_peaks` Gaussians with Poisson weights. The
/// abscissa is rescaled internally to keep the normal matrix well
/// conditioned for tiny angles.
pub fn fit_gaussian_peaks(xs: &[f64], counts: &[f64], n_peaks: usize) -> Result<PeakFit> {
    let model = GaussianPeaksModel { n_peaks };
    if n_peaks == 0 || xs.len() != counts.len() || xs.len() <= model.n_params() {
        return Err(Error::InvalidInput(format!(
            "peak fit with {n_peaks} peaks needs more than {} points",
            model.n_params()
        )));
    }
    if counts.iter().any(|&n| !(n.is_finite() && n >= 0.0)) {
        return Err(Error::InvalidInput(
            "counts must be finite and non-negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let x0 = xs[order[0]];
    let span = xs[order[order.len() - 1]] - x0;
    if !(span > 0.0) {
        return Err(Error::InvalidInput(
            "peak fit needs distinct abscissae".into(),
        ));
    }
    let scaled: Vec<f64> = order.iter().map(|&i| (xs[i] - x0) / span).collect();
    let ys: Vec<f64> = order.iter().map(|&i| counts[i]).collect();

    let p0 = initial_guess(&scaled, &ys, n_peaks)?;
    let weights = poisson_weights(&ys);
    let sol = minimize(&model, &scaled, &ys, &weights, &p0, &LsqOptions::default())?;
    let sd = |j: usize| sol.covariance[(j, j)].max(0.0).sqrt();

    let mut peaks: Vec<FittedPeak> = (0..n_peaks)
        .map(|k| {
            let j = 1 + 3 * k;
            FittedPeak {
                height: sol.params[j],
                height_sigma: sd(j),
                center: x0 + span * sol.params[j + 1],
                center_sigma: span * sd(j + 1),
                fwhm: span * sol.params[j + 2].abs(),
                fwhm_sigma: span * sd(j + 2),
            }
        })
        .collect();
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(PeakFit {
        background: sol.params[0],
        background_sigma: sd(0),
        peaks,
        chi_square: sol.chi_square,
        dof: xs.len() - model.n_params(),
    })
}
