use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::plan::{phase_grid, ScanKind, ScanPlan, ScanRecord};
use crate::analysis::{
    chsh_s, expectation_from_counts, expectation_from_fringes, fit_fringe, visibility_budget,
    BellResult, FringeFit,
};
use crate::apparatus::{make_path_dephasing, make_spin_depolarizer};
use crate::counting::{expected_rate, CountRecord, CountingSetup, Detector, RngSeed};
use crate::error::{check_positive, Error, Result};
use crate::qcore::{
    apply_all, joint_expectation, prepare_bell_state, ElementChannel, JointSetting, SpinPathState,
};

/// Spin analysis angles of a Bell run.
pub const BELL_ALPHAS: [f64; 4] = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
/// Phase shifter settings entering the expectation values.
pub const BELL_CHIS: [f64; 4] = [FRAC_PI_4, 3.0 * FRAC_PI_4, 5.0 * FRAC_PI_4, 7.0 * FRAC_PI_4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellConfig {
    pub contrast: f64,
    pub polarization: f64,
    /// Efficiency of every spin turner used to set the analysis direction.
    pub flipper_efficiencies: Vec<f64>,
    /// Neutrons/s reaching the detector for a fully transmitted outcome.
    pub base_rate: f64,
    pub counting: CountingSetup,
    /// Points of the χ scan per spin angle; the four settings in
    /// [`BELL_CHIS`] are added if the scan misses them.
    pub fine_points: usize,
}

impl BellConfig {
    pub fn visibility(&self) -> Result<f64> {
        visibility_budget(self.contrast, self.polarization, &self.flipper_efficiencies)
    }

    /// State reaching the analyzers: contrast loss on the path coherence,
    /// partial beam polarization, and one depolarizing factor per spin
    /// turner.
    pub fn prepared_state(&self) -> Result<SpinPathState> {
        let mut chain: Vec<ElementChannel> = vec![
            make_path_dephasing(self.contrast)?,
            make_spin_depolarizer(self.polarization)?,
        ];
        for &f in &self.flipper_efficiencies {
            chain.push(make_spin_depolarizer(f)?);
        }
        Ok(apply_all(&prepare_bell_state(), &chain))
    }

    /// χ values scanned at each spin angle, in scan order.
    pub fn chi_grid(&self) -> Vec<f64> {
        let mut chis = phase_grid(self.fine_points);
        for c in BELL_CHIS {
            let present = chis.iter().any(|&x| {
                let d = (x - c).rem_euclid(std::f64::consts::TAU);
                d.min(std::f64::consts::TAU - d) < 1e-9
            });
            if !present {
                chis.push(c);
            }
        }
        chis
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellRun {
    pub plan: ScanPlan,
    /// One record per grid point, in grid order.
    pub records: Vec<ScanRecord>,
    /// One fringe per spin angle of [`BELL_ALPHAS`].
    pub fringes: Vec<(f64, FringeFit)>,
    /// From the four-point count combination.
    pub result: BellResult,
    /// From the fitted fringes evaluated at the same settings.
    pub fringe_result: BellResult,
    /// S of the prepared state without counting statistics.
    pub analytic_s: f64,
    pub visibility: f64,
}

/// The four `(α, χ)` pairs of the CHSH combination as indices into
/// [`BELL_ALPHAS`] and [`BELL_CHIS`]; `7π/4` stands for `−π/4`.
const CHSH_PAIRS: [(usize, usize); 4] = [(0, 0), (0, 3), (1, 0), (1, 3)];

/// Records at `(α, χ)` whose spin angle and phase lie within `1e-9` of the
/// requested values modulo 2π.
fn find<'a>(records: &'a [ScanRecord], alpha: f64, chi: f64) -> Result<&'a CountRecord> {
    let close = |a: f64, b: f64| {
        let d = (a - b).rem_euclid(std::f64::consts::TAU);
        d.min(std::f64::consts::TAU - d) < 1e-9
    };
    records
        .iter()
        .map(|r| &r.record)
        .find(|r| close(r.setting.alpha, alpha) && close(r.setting.chi, chi))
        .ok_or_else(|| Error::InvalidInput(format!("no record at (α, χ) = ({alpha}, {chi})")))
}

/// Four-point CHSH analysis of Bell-run records: each expectation value uses
/// the counts at `(α,χ)`, `(α+π,χ+π)`, `(α,χ+π)` and `(α+π,χ)`.
pub fn analyze_bell_records(records: &[ScanRecord]) -> Result<BellResult> {
    let e = CHSH_PAIRS.map(|(i, j)| -> Result<_> {
        let (a, a_pi) = (BELL_ALPHAS[i], BELL_ALPHAS[(i + 2) % 4]);
        let (c, c_pi) = (BELL_CHIS[j], BELL_CHIS[(j + 2) % 4]);
        expectation_from_counts(
            find(records, a, c)?,
            find(records, a_pi, c_pi)?,
            find(records, a, c_pi)?,
            find(records, a_pi, c)?,
        )
    });
    let [e0, e1, e2, e3] = e;
    chsh_s([e0?, e1?, e2?, e3?])
}

/// CHSH analysis from fringes fitted at each of [`BELL_ALPHAS`] (same order).
pub fn analyze_bell_fringes(fringes: &[(f64, FringeFit)]) -> Result<BellResult> {
    if fringes.len() != 4 {
        return Err(Error::InvalidInput(
            "fringe analysis needs one fit per spin angle".into(),
        ));
    }
    let e = CHSH_PAIRS.map(|(i, j)| {
        expectation_from_fringes(
            &fringes[i].1,
            &fringes[(i + 2) % 4].1,
            JointSetting::new(BELL_ALPHAS[i], BELL_CHIS[j]),
        )
    });
    let [e0, e1, e2, e3] = e;
    chsh_s([e0?, e1?, e2?, e3?])
}

/// Simulated Bell measurement: a χ scan at each of the four spin angles,
/// counted in the O detector behind the joint `(+,+)` projection.
pub fn run_bell_experiment(config: &BellConfig, seed: RngSeed) -> Result<BellRun> {
    check_positive("base_rate", config.base_rate)?;
    if config.fine_points < 5 {
        return Err(Error::InvalidInput(
            "Bell fringes need at least 5 χ points".into(),
        ));
    }
    let visibility = config.visibility()?;
    let state = config.prepared_state()?;
    let chis = config.chi_grid();
    let grid: Vec<Vec<f64>> = BELL_ALPHAS
        .iter()
        .flat_map(|&a| chis.iter().map(move |&c| vec![a, c]))
        .collect();
    let plan = ScanPlan::new(ScanKind::Bell, grid, config.counting.integration_time, seed)?;

    let records = plan.execute(|p, s| {
        let setting = JointSetting::new(p[0], p[1]);
        let rate = expected_rate(&state, setting, config.base_rate, 1.0);
        Ok(ScanRecord {
            coordinates: p.to_vec(),
            record: config.counting.measure(setting, Detector::O, rate, s)?,
        })
    })?;

    let fringes = records
        .chunks(chis.len())
        .map(|rows| {
            let recs: Vec<CountRecord> = rows.iter().map(|r| r.record).collect();
            Ok((recs[0].setting.alpha, fit_fringe(&recs)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let result = analyze_bell_records(&records)?;
    let fringe_result = analyze_bell_fringes(&fringes)?;
    let analytic = CHSH_PAIRS
        .map(|(i, j)| joint_expectation(&state, JointSetting::new(BELL_ALPHAS[i], BELL_CHIS[j])));
    Ok(BellRun {
        plan,
        records,
        fringes,
        result,
        fringe_result,
        analytic_s: analytic[0] + analytic[1] - analytic[2] + analytic[3],
        visibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn config(contrast: f64, base_rate: f64, time: f64, noise: bool) -> BellConfig {
        BellConfig {
            contrast,
            polarization: 1.0,
            flipper_efficiencies: vec![],
            base_rate,
            counting: CountingSetup::new(1.0, time, noise).unwrap(),
            fine_points: 16,
        }
    }

    #[test]
    fn noise_free_run_reaches_ideal_bound() {
        let run = run_bell_experiment(&config(1.0, 1e9, 1e3, false), RngSeed(1)).unwrap();
        assert!((run.analytic_s - 2.0 * SQRT_2).abs() < 1e-12);
        assert!((run.result.s_value - 2.0 * SQRT_2).abs() < 1e-9);
        assert!((run.fringe_result.s_value - 2.0 * SQRT_2).abs() < 1e-9);
        assert_eq!(run.records.len(), 64);
    }

    #[test]
    fn visibility_scales_s() {
        let run = run_bell_experiment(&config(0.7, 1e9, 1e3, false), RngSeed(1)).unwrap();
        assert!((run.analytic_s - 2.0 * SQRT_2 * 0.7).abs() < 1e-12);
        assert!((run.result.s_value - 1.98).abs() < 0.002);
    }

    #[test]
    fn flipper_and_polarization_losses_multiply() {
        let mut cfg = config(0.91, 1.0, 1.0, false);
        cfg.polarization = 0.993;
        cfg.flipper_efficiencies = vec![0.98];
        let state = cfg.prepared_state().unwrap();
        let e = joint_expectation(&state, JointSetting::new(0.0, 0.0));
        assert!((e - cfg.visibility().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let cfg = config(0.8363, 50.0, 150.0, true);
        let a = run_bell_experiment(&cfg, RngSeed(42)).unwrap();
        let b = run_bell_experiment(&cfg, RngSeed(42)).unwrap();
        assert_eq!(a, b);
        let c = run_bell_experiment(&cfg, RngSeed(43)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn noisy_run_is_statistically_consistent() {
        let cfg = config(0.8363, 50.0, 150.0, true);
        let mut inside = 0;
        for seed in 0..40 {
            let run = run_bell_experiment(&cfg, RngSeed(seed)).unwrap();
            if (run.result.s_value - run.analytic_s).abs() <= 3.0 * run.result.s_sigma {
                inside += 1;
            }
        }
        assert!(inside >= 38, "{inside}/40");
    }

    #[test]
    fn chi_grid_adds_missing_settings() {
        let mut cfg = config(1.0, 1.0, 1.0, false);
        assert_eq!(cfg.chi_grid().len(), 16);
        cfg.fine_points = 6;
        assert_eq!(cfg.chi_grid().len(), 10);
        cfg.fine_points = 3;
        assert!(run_bell_experiment(&cfg, RngSeed(0)).is_err());
    }
}
