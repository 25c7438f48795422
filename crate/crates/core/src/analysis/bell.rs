use std::f64::consts::{PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::fringe::FringeFit;
use crate::counting::CountRecord;
use crate::error::{check_range, Error, Result};
use crate::qcore::JointSetting;

/// Angles closer than this (mod 2π) count as the same setting. Recorded
/// angles carry 12 significant digits.
const SETTING_TOL: f64 = 1e-9;

/// `E(α, χ)` with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationEstimate {
    pub value: f64,
    pub sigma: f64,
    pub setting: JointSetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    /// `E(α₁,χ₁), E(α₁,χ₂), E(α₂,χ₁), E(α₂,χ₂)`.
    pub e: [ExpectationEstimate; 4],
    pub s_value: f64,
    pub s_sigma: f64,
    /// `(S − 2) / σ_S`.
    pub n_sigma_violation: f64,
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d) <= SETTING_TOL
}

/// `E = (A − B)/(A + B)` with `A = N₊₊ + N₋₋`, `B = N₊₋ + N₋₊` and
/// `σ_E = 2√(B²A + A²B)/(A + B)²` from Poisson variances `σ²_A = A`,
/// `σ²_B = B`. Inputs may be counts or noise-free mean counts.
pub fn expectation_from_values(
    n_pp: f64,
    n_mm: f64,
    n_pm: f64,
    n_mp: f64,
    setting: JointSetting,
) -> Result<ExpectationEstimate> {
    if [n_pp, n_mm, n_pm, n_mp]
        .iter()
        .any(|n| !(n.is_finite() && *n >= 0.0))
    {
        return Err(Error::InvalidInput(
            "counts must be finite and non-negative".into(),
        ));
    }
    let a = n_pp + n_mm;
    let b = n_pm + n_mp;
    let total = a + b;
    if total <= 0.0 {
        return Err(Error::Undefined(
            "expectation value from zero total counts".into(),
        ));
    }
    Ok(ExpectationEstimate {
        value: (a - b) / total,
        sigma: 2.0 * (b * b * a + a * a * b).sqrt() / (total * total),
        setting,
    })
}

/// Expectation value from the four count records at `(α,χ)`, `(α+π,χ+π)`,
/// `(α,χ+π)` and `(α+π,χ)`.
pub fn expectation_from_counts(
    n_pp: &CountRecord,
    n_mm: &CountRecord,
    n_pm: &CountRecord,
    n_mp: &CountRecord,
) -> Result<ExpectationEstimate> {
    let JointSetting { alpha, chi } = n_pp.setting;
    let expected = [
        (n_mm, alpha + PI, chi + PI),
        (n_pm, alpha, chi + PI),
        (n_mp, alpha + PI, chi),
    ];
    for (rec, a, c) in expected {
        if !(same_angle(rec.setting.alpha, a) && same_angle(rec.setting.chi, c)) {
            return Err(Error::InvalidInput(format!(
                "record at (α, χ) = ({}, {}) does not complete the set for ({alpha}, {chi})",
                rec.setting.alpha, rec.setting.chi
            )));
        }
    }
    expectation_from_values(
        n_pp.counts(),
        n_mm.counts(),
        n_pm.counts(),
        n_mp.counts(),
        n_pp.setting,
    )
}

/// Expectation value from two fitted fringes, `at_alpha` recorded at α and
/// `at_alpha_pi` at α+π, each evaluated at χ and χ+π:
/// `E = (A₁cos(χ+φ₁) − A₂cos(χ+φ₂)) / (O₁ + O₂)`. The two fits are treated
/// as independent.
pub fn expectation_from_fringes(
    at_alpha: &FringeFit,
    at_alpha_pi: &FringeFit,
    setting: JointSetting,
) -> Result<ExpectationEstimate> {
    let chi = setting.chi;
    let o = at_alpha.offset + at_alpha_pi.offset;
    if o <= 0.0 {
        return Err(Error::Undefined("fringe offsets sum to zero".into()));
    }
    let (s1, c1) = (chi + at_alpha.phase).sin_cos();
    let (s2, c2) = (chi + at_alpha_pi.phase).sin_cos();
    let num = at_alpha.amplitude * c1 - at_alpha_pi.amplitude * c2;
    let value = num / o;
    // gradients w.r.t. (O, A, φ) of each fit
    let g1 = [-value / o, c1 / o, -at_alpha.amplitude * s1 / o];
    let g2 = [-value / o, -c2 / o, at_alpha_pi.amplitude * s2 / o];
    let quad = |g: &[f64; 3], cov: &[[f64; 3]; 3]| {
        (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| g[i] * cov[i][j] * g[j])
            .sum::<f64>()
    };
    let var = quad(&g1, &at_alpha.covariance) + quad(&g2, &at_alpha_pi.covariance);
    Ok(ExpectationEstimate {
        value,
        sigma: var.max(0.0).sqrt(),
        setting,
    })
}

/// `S = E(α₁,χ₁) + E(α₁,χ₂) − E(α₂,χ₁) + E(α₂,χ₂)` with independent errors
/// added in quadrature.
pub fn chsh_s(e: [ExpectationEstimate; 4]) -> Result<BellResult> {
    let [e11, e12, e21, e22] = e.map(|x| x.setting);
    let consistent = same_angle(e11.alpha, e12.alpha)
        && same_angle(e21.alpha, e22.alpha)
        && same_angle(e11.chi, e21.chi)
        && same_angle(e12.chi, e22.chi);
    if !consistent {
        return Err(Error::InvalidInput(
            "expectation values must be ordered (α₁,χ₁), (α₁,χ₂), (α₂,χ₁), (α₂,χ₂)".into(),
        ));
    }
    let s_value = e[0].value + e[1].value - e[2].value + e[3].value;
    let s_sigma = e.iter().map(|x| x.sigma * x.sigma).sum::<f64>().sqrt();
    Ok(BellResult {
        e,
        s_value,
        s_sigma,
        n_sigma_violation: (s_value - 2.0) / s_sigma,
    })
}

/// Product of interference contrast, beam polarization and flipper
/// efficiencies; each factor scales every measurable `|E|`.
pub fn visibility_budget(contrast: f64, polarization: f64, flipper_effs: &[f64]) -> Result<f64> {
    check_range("contrast", contrast, 0.0, 1.0, "[0, 1]")?;
    check_range("polarization", polarization, 0.0, 1.0, "[0, 1]")?;
    let mut v = contrast * polarization;
    for &f in flipper_effs {
        check_range("flipper_efficiency", f, 0.0, 1.0, "[0, 1]")?;
        v *= f;
    }
    Ok(v)
}

/// `2√2 · visibility`.
pub fn predicted_s(visibility: f64) -> f64 {
    2.0 * SQRT_2 * visibility
}
