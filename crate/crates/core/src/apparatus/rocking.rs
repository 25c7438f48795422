use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// Gaussian peak of a rocking curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RockingPeak {
    /// Peak position, rad.
    pub center: f64,
    /// Full width at half maximum, rad.
    pub fwhm: f64,
    /// Peak intensity (any unit, typically counts/s or normalized).
    pub height: f64,
}

impl RockingPeak {
    pub fn new(center: f64, fwhm: f64, height: f64) -> Result<Self> {
        check_positive("peak.fwhm", fwhm)?;
        if !(height.is_finite() && height >= 0.0) || !center.is_finite() {
            return Err(Error::OutOfRange {
                name: "peak.height",
                value: height,
                range: "[0, inf)",
            });
        }
        Ok(Self {
            center,
            fwhm,
            height,
        })
    }

    /// Standard deviation of the equivalent normal profile.
    pub fn sigma(&self) -> f64 {
        self.fwhm / (8.0 * LN_2).sqrt()
    }

    pub fn value(&self, angle: f64) -> f64 {
        let u = (angle - self.center) / self.fwhm;
        self.height * (-4.0 * LN_2 * u * u).exp()
    }
}

/// Monochromator crystal in front of the prisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monochromator {
    SingleFold,
    TripleFold,
}

impl Monochromator {
    /// Rocking-peak FWHM measured behind this monochromator, rad.
    pub fn fwhm(self) -> f64 {
        match self {
            Monochromator::SingleFold => 6.11e-6,
            Monochromator::TripleFold => 4.26e-6,
        }
    }

    /// Quoted uncertainty of [`Self::fwhm`], rad.
    pub fn fwhm_uncertainty(self) -> f64 {
        match self {
            Monochromator::SingleFold => 0.47e-6,
            Monochromator::TripleFold => 0.10e-6,
        }
    }
}

/// π/2 spin-turner coil placed in the beam before the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoilKind {
    NoCoil,
    AlWire,
    AlRibbon,
    CuRibbon3mm,
    CuRibbon4mm,
}

impl CoilKind {
    pub const ALL: [CoilKind; 5] = [
        CoilKind::NoCoil,
        CoilKind::AlWire,
        CoilKind::AlRibbon,
        CoilKind::CuRibbon3mm,
        CoilKind::CuRibbon4mm,
    ];

    /// (peak height, FWHM) relative to the empty beam line.
    pub fn factors(self) -> (f64, f64) {
        match self {
            CoilKind::NoCoil => (1.000, 1.000),
            CoilKind::AlWire => (0.56, 1.68),
            CoilKind::AlRibbon => (0.80, 1.16),
            CoilKind::CuRibbon3mm => (0.84, 1.11),
            CoilKind::CuRibbon4mm => (0.85, 1.16),
        }
    }
}

/// Peak after small-angle scattering in the given coil.
pub fn broadened_peak(base: &RockingPeak, coil: CoilKind) -> RockingPeak {
    let (h, w) = coil.factors();
    RockingPeak {
        center: base.center,
        fwhm: base.fwhm * w,
        height: base.height * h,
    }
}

/// Sum of Gaussian peak profiles evaluated on `angle_grid`.
pub fn rocking_curve(peaks: &[RockingPeak], angle_grid: &[f64]) -> Vec<f64> {
    angle_grid
        .iter()
        .map(|&a| peaks.iter().map(|p| p.value(a)).sum())
        .collect()
}

// 5-point Gauss–Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

const MAX_PANELS: usize = 400_000;

fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panel: f64) -> f64 {
    let n = (((hi - lo) / panel).ceil() as usize).clamp(1, MAX_PANELS);
    let h = (hi - lo) / n as f64;
    (0..n)
        .map(|k| {
            let mid = lo + (k as f64 + 0.5) * h;
            GL_NODES
                .iter()
                .zip(GL_WEIGHTS)
                .map(|(&x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Degree of polarization of the beam selected by an interferometer whose
/// Gaussian acceptance window (FWHM `acceptance_fwhm`) is centered on the
/// spin-up peak: `(I_up − I_down)/(I_up + I_down)`, each intensity being the
/// overlap integral of that spin's peak with the window.
pub fn polarization_from_peak_overlap(
    up: &RockingPeak,
    down: &RockingPeak,
    acceptance_fwhm: f64,
) -> Result<f64> {
    let window = RockingPeak::new(up.center, acceptance_fwhm, 1.0)?;
    let reach = 14.0 * up.sigma().max(down.sigma()).max(window.sigma());
    let lo = up.center.min(down.center) - reach;
    let hi = up.center.max(down.center) + reach;
    let panel = 0.25 * up.sigma().min(down.sigma()).min(window.sigma());
    let i_up = integrate(|a| up.value(a) * window.value(a), lo, hi, panel);
    let i_down = integrate(|a| down.value(a) * window.value(a), lo, hi, panel);
    let total = i_up + i_down;
    if total <= 0.0 {
        return Err(Error::Undefined(
            "no intensity inside the acceptance window".into(),
        ));
    }
    Ok((i_up - i_down) / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Closed form of ∫ g1·g2 for two Gaussians (oracle for the quadrature).
    fn overlap_closed_form(a: &RockingPeak, b: &RockingPeak) -> f64 {
        let (sa, sb) = (a.sigma(), b.sigma());
        let s2 = sa * sa + sb * sb;
        a.height * b.height * (2.0 * PI).sqrt() * sa * sb / s2.sqrt()
            * (-(a.center - b.center).powi(2) / (2.0 * s2)).exp()
    }

    #[test]
    fn peak_value_at_center_and_half_width() {
        let p = RockingPeak::new(1e-5, 4.26e-6, 7.0).unwrap();
        let v = rocking_curve(&[p], &[1e-5, 1e-5 + 2.13e-6, 1e-5 - 2.13e-6]);
        assert!((v[0] - 7.0).abs() < 1e-12);
        assert!((v[1] - 3.5).abs() < 1e-12);
        assert!((v[2] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn separated_prism_peaks_have_deep_minimum() {
        let up = RockingPeak::new(0.0, 4.26e-6, 1.0).unwrap();
        let down = RockingPeak::new(2.3e-5, 4.26e-6, 1.0).unwrap();
        let grid: Vec<f64> = (0..=2300).map(|k| k as f64 * 1e-8).collect();
        let curve = rocking_curve(&[up, down], &grid);
        let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
        // Gaussian tail at the midpoint: 2·exp(−4 ln2 (1.15e-5/4.26e-6)²)
        let midpoint = 2.0 * (-4.0 * LN_2 * (1.15e-5f64 / 4.26e-6).powi(2)).exp();
        assert!((min - midpoint).abs() < 1e-15);
        assert!(min < 1e-3);
    }

    #[test]
    fn table_factors_are_exact() {
        let base = RockingPeak::new(0.0, 4.26e-6, 1000.0).unwrap();
        let b = broadened_peak(&base, CoilKind::NoCoil);
        assert_eq!((b.height, b.fwhm), (1000.0, 4.26e-6));
        let b = broadened_peak(&base, CoilKind::AlWire);
        assert_eq!(b.height, 1000.0 * 0.56);
        assert_eq!(b.fwhm, 4.26e-6 * 1.68);
        let b = broadened_peak(&base, CoilKind::CuRibbon3mm);
        assert_eq!(b.height, 1000.0 * 0.84);
        assert_eq!(b.fwhm, 4.26e-6 * 1.11);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let up = RockingPeak::new(0.0, 4.26e-6, 1.0).unwrap();
        let window = RockingPeak::new(0.0, 3.0e-6, 1.0).unwrap();
        for &sep in &[0.0, 3e-6, 8e-6, 2.3e-5] {
            let down = RockingPeak::new(sep, 6.11e-6, 0.8).unwrap();
            let p = polarization_from_peak_overlap(&up, &down, 3.0e-6).unwrap();
            let iu = overlap_closed_form(&up, &window);
            let id = overlap_closed_form(&down, &window);
            let expected = (iu - id) / (iu + id);
            assert!(
                ((p - expected) / expected.abs().max(1e-300)).abs() < 1e-8,
                "sep {sep}: {p} vs {expected}"
            );
        }
    }

    #[test]
    fn polarization_limits() {
        let up = RockingPeak::new(0.0, 4.26e-6, 1.0).unwrap();
        let same = polarization_from_peak_overlap(&up, &up, 4.26e-6).unwrap();
        assert!(same.abs() < 1e-14);
        let far = RockingPeak::new(1e-3, 4.26e-6, 1.0).unwrap();
        assert!((polarization_from_peak_overlap(&up, &far, 4.26e-6).unwrap() - 1.0).abs() < 1e-15);
        let prism = RockingPeak::new(2.3e-5, 4.26e-6, 1.0).unwrap();
        assert!(polarization_from_peak_overlap(&up, &prism, 4.26e-6).unwrap() > 0.993);
    }

    #[test]
    fn invalid_peaks_rejected() {
        assert!(RockingPeak::new(0.0, 0.0, 1.0).is_err());
        assert!(RockingPeak::new(0.0, 1e-6, -1.0).is_err());
    }
}
