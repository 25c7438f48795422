//! Two-flipper polarization analysis.
//!
//! With beam polarization `P`, analyzer efficiency `A` and flip
//! probabilities `f₁`, `f₂`, the analyzer transmits
//! `I(a, b) = c·[1 + P·A·(1 − 2f₁)^a·(1 − 2f₂)^b]` with flipper `i` switched
//! on when its exponent is 1. The four intensities determine `c`, `P·A`,
//! `f₁` and `f₂`:
//!
//! - `d₁ = I₀₀ − I₁₀ = 2cPA·f₁`, `d₂ = I₀₀ − I₀₁ = 2cPA·f₂`,
//!   `d₃ = I₀₀ − I₁₁ = 2cPA·(f₁ + f₂ − 2f₁f₂)`
//! - `cPA = d₁d₂ / (d₁ + d₂ − d₃)`, `fᵢ = dᵢ / (2cPA)`, `c = I₀₀ − cPA`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::plan::{ScanKind, ScanPlan, ScanRecord};
use crate::apparatus::{make_spin_depolarizer, make_spin_turner, SpinAnalyzer};
use crate::counting::{CountingSetup, Detector, RngSeed};
use crate::error::{check_positive, check_range, Error, Result};
use crate::qcore::{apply_all, JointSetting, Ket4, SpinPathState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoFlipperConfig {
    pub polarization: f64,
    pub flipper_efficiencies: (f64, f64),
    pub analyzer_efficiency: f64,
    pub base_rate: f64,
    pub counting: CountingSetup,
}

/// Parameters recovered from the four flipper intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipperParameters {
    /// Analyzer transmission of an unpolarized beam.
    pub intensity: f64,
    /// Product of beam polarization and analyzer efficiency.
    pub polarization_analysis: f64,
    pub efficiency_1: f64,
    pub efficiency_2: f64,
}

/// Solves the flipping-ratio relations for `I₀₀, I₁₀, I₀₁, I₁₁`.
pub fn invert_flipping_ratios(i00: f64, i10: f64, i01: f64, i11: f64) -> Result<FlipperParameters> {
    let d1 = i00 - i10;
    let d2 = i00 - i01;
    let d3 = i00 - i11;
    let denom = d1 + d2 - d3;
    if denom == 0.0 {
        return Err(Error::Undefined(
            "flipper intensities do not separate polarization from flip efficiency".into(),
        ));
    }
    let u = d1 * d2 / denom;
    let c = i00 - u;
    if !(u != 0.0 && c > 0.0) {
        return Err(Error::Undefined(format!(
            "flipper intensities give no polarization (cPA = {u}, c = {c})"
        )));
    }
    Ok(FlipperParameters {
        intensity: c,
        polarization_analysis: u / c,
        efficiency_1: d1 / (2.0 * u),
        efficiency_2: d2 / (2.0 * u),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoFlipperRun {
    pub plan: ScanPlan,
    /// Grid order `(0,0), (1,0), (0,1), (1,1)`.
    pub records: Vec<ScanRecord>,
    pub polarization: Estimate,
    pub efficiency_1: Estimate,
    pub efficiency_2: Estimate,
}

fn spin_up_path_i() -> Result<SpinPathState> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    SpinPathState::from_ket(&Ket4::new(one, zero, zero, zero))
}

/// Polarization and both flip efficiencies from the counts
/// `N₀₀, N₁₀, N₀₁, N₁₁`, with Poisson errors propagated through
/// [`invert_flipping_ratios`] by central differences.
pub fn estimate_flipper_parameters(counts: [f64; 4], analyzer: f64) -> Result<[Estimate; 3]> {
    check_range(
        "analyzer_efficiency",
        analyzer,
        f64::MIN_POSITIVE,
        1.0,
        "(0, 1]",
    )?;
    let pick = |p: &FlipperParameters| {
        [
            p.polarization_analysis / analyzer,
            p.efficiency_1,
            p.efficiency_2,
        ]
    };
    let solve = |n: &[f64; 4]| invert_flipping_ratios(n[0], n[1], n[2], n[3]).map(|p| pick(&p));
    let center = solve(&counts)?;
    let mut var = [0.0; 3];
    for k in 0..4 {
        let h = 1e-6 * counts[k].max(1.0);
        let (mut hi, mut lo) = (counts, counts);
        hi[k] += h;
        lo[k] -= h;
        let (a, b) = (solve(&hi)?, solve(&lo)?);
        for j in 0..3 {
            let d = (a[j] - b[j]) / (2.0 * h);
            var[j] += d * d * counts[k].max(1.0);
        }
    }
    Ok([0, 1, 2].map(|j| Estimate {
        value: center[j],
        sigma: var[j].sqrt(),
    }))
}

/// Counts a polarized spin-up beam behind the analyzer for all four on/off
/// combinations of two π flippers and inverts the flipping ratios.
pub fn run_two_flipper_analysis(config: &TwoFlipperConfig, seed: RngSeed) -> Result<TwoFlipperRun> {
    check_positive("base_rate", config.base_rate)?;
    let (f1, f2) = config.flipper_efficiencies;
    check_range("flipper_efficiency", f1, 0.0, 1.0, "[0, 1]")?;
    check_range("flipper_efficiency", f2, 0.0, 1.0, "[0, 1]")?;
    let analyzer = SpinAnalyzer::new(config.analyzer_efficiency)?;
    if analyzer.efficiency == 0.0 {
        return Err(Error::Undefined(
            "an analyzer of zero efficiency sees no polarization".into(),
        ));
    }
    let polarized = make_spin_depolarizer(config.polarization)?.apply(&spin_up_path_i()?);
    let flippers = [make_spin_turner(PI, f1)?, make_spin_turner(PI, f2)?];

    let grid = vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    ];
    let plan = ScanPlan::new(
        ScanKind::TwoFlipper,
        grid,
        config.counting.integration_time,
        seed,
    )?;
    let records = plan.execute(|p, s| {
        let active: Vec<_> = flippers
            .iter()
            .zip(p)
            .filter(|(_, &on)| on == 1.0)
            .map(|(f, _)| f.clone())
            .collect();
        let state = apply_all(&polarized, &active);
        let rate = config.base_rate * analyzer.transmission(&state);
        Ok(ScanRecord {
            coordinates: p.to_vec(),
            record: config
                .counting
                .measure(JointSetting::new(0.0, 0.0), Detector::O, rate, s)?,
        })
    })?;
    let counts = [0, 1, 2, 3].map(|k| records[k].record.counts());
    let [polarization, efficiency_1, efficiency_2] =
        estimate_flipper_parameters(counts, analyzer.efficiency)?;
    Ok(TwoFlipperRun {
        plan,
        records,
        polarization,
        efficiency_1,
        efficiency_2,
    })
}
