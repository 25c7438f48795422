//! Detector count generation.
//!
//! Joint outcome probabilities from [`crate::qcore`] become mean count rates,
//! and mean rates become integer counts through Poisson shot noise followed
//! by binomial thinning with the detector efficiency.
//!
//! # Seed derivation
//!
//! Every random draw comes from a ChaCha20 generator seeded with
//! `RngSeed::derive(stream, index)` of the run seed, where `stream` names the
//! procedure (see [`crate::procedures::ScanKind::stream`]) and
//! `index` is the position of the point in the scan grid (repetitions are
//! folded in by deriving the run seed first). Derivation is two rounds of the
//! SplitMix64 finalizer, so the value drawn for a point never depends on the
//! order in which points are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::qcore::{
    ideal_joint_probability, path_projector, spin_projector, JointSetting, Sign, SpinPathState,
};

/// Exit port of the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    /// Forward beam, spin analyzed.
    O,
    /// Deflected beam, not spin analyzed.
    H,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::O => "O",
            Detector::H => "H",
        }
    }
}

impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Detector::O),
            "H" => Ok(Detector::H),
            other => Err(Error::InvalidInput(format!("unknown detector `{other}`"))),
        }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of all randomness in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Child seed for point `index` of stream `stream`.
    pub fn derive(self, stream: u64, index: u64) -> RngSeed {
        let s = splitmix64(self.0 ^ splitmix64(stream));
        RngSeed(splitmix64(s ^ index.wrapping_mul(GOLDEN)))
    }

    pub fn rng(self) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(self.0)
    }
}

/// One detector measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: JointSetting,
    /// s.
    pub integration_time: f64,
    /// Mean detected rate, counts/s.
    pub mean_rate: f64,
    pub observed_counts: u64,
    pub detector: Detector,
}

impl CountRecord {
    pub fn counts(&self) -> f64 {
        self.observed_counts as f64
    }

    pub fn expected_counts(&self) -> f64 {
        self.mean_rate * self.integration_time
    }
}

/// O-detector rate for the spin-analyzed `(+,+)` joint outcome:
/// `2 · base_rate · efficiency · p₊₊`, so the rate averaged over settings is
/// `base_rate · efficiency / 2` and a perfectly correlated state peaks at
/// `base_rate · efficiency`.
pub fn expected_rate(
    state: &SpinPathState,
    setting: JointSetting,
    base_rate: f64,
    efficiency: f64,
) -> f64 {
    let p = ideal_joint_probability(state, setting, (Sign::Plus, Sign::Plus));
    2.0 * base_rate * efficiency * p.max(0.0)
}

/// Rate of a path-interference fringe without spin analysis. The O detector
/// projects onto `(|I⟩ + e^{iχ}|II⟩)/√2`, the H detector onto the orthogonal
/// combination.
pub fn expected_path_rate(
    state: &SpinPathState,
    chi: f64,
    detector: Detector,
    base_rate: f64,
    efficiency: f64,
) -> f64 {
    let sign = match detector {
        Detector::O => Sign::Plus,
        Detector::H => Sign::Minus,
    };
    base_rate * efficiency * state.expectation(&path_projector(chi, sign)).max(0.0)
}

/// Rate behind a spin analyzer set to azimuth `alpha`, summed over paths.
pub fn expected_spin_rate(
    state: &SpinPathState,
    alpha: f64,
    base_rate: f64,
    efficiency: f64,
) -> f64 {
    base_rate
        * efficiency
        * state
            .expectation(&spin_projector(alpha, Sign::Plus))
            .max(0.0)
}

fn check_rate_time(rate: f64, time: f64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::OutOfRange {
            name: "rate",
            value: rate,
            range: "[0, inf)",
        });
    }
    if !(time.is_finite() && time >= 0.0) {
        return Err(Error::OutOfRange {
            name: "time",
            value: time,
            range: "[0, inf)",
        });
    }
    let mean = rate * time;
    if mean >= 9.223_372_036_854_776e18 {
        return Err(Error::OutOfRange {
            name: "rate*time",
            value: mean,
            range: "[0, 2^63)",
        });
    }
    Ok(mean)
}

fn poisson(mean: f64, rng: &mut ChaCha20Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("mean is positive and finite");
    dist.sample(rng) as u64
}

/// Poisson-distributed counts with mean `rate · time`.
pub fn draw_counts(rate: f64, time: f64, seed: RngSeed) -> Result<u64> {
    let mean = check_rate_time(rate, time)?;
    Ok(poisson(mean, &mut seed.rng()))
}

/// Neutrons arriving at `arrival_rate` for `time`, each registered with
/// probability `efficiency`.
pub fn draw_detected_counts(
    arrival_rate: f64,
    efficiency: f64,
    time: f64,
    seed: RngSeed,
) -> Result<u64> {
    let mean = check_rate_time(arrival_rate, time)?;
    check_range("detector_efficiency", efficiency, 0.0, 1.0, "[0, 1]")?;
    let mut rng = seed.rng();
    let arrived = poisson(mean, &mut rng);
    if arrived == 0 || efficiency == 1.0 {
        return Ok(arrived);
    }
    let thin = Binomial::new(arrived, efficiency).expect("valid binomial parameters");
    Ok(thin.sample(&mut rng))
}

/// How a procedure turns rates into counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingSetup {
    pub detector_efficiency: f64,
    /// s per scan point.
    pub integration_time: f64,
    /// When false, counts are the rounded mean (noise-free limit).
    pub shot_noise: bool,
}

impl CountingSetup {
    pub fn new(detector_efficiency: f64, integration_time: f64, shot_noise: bool) -> Result<Self> {
        check_range(
            "detector_efficiency",
            detector_efficiency,
            f64::MIN_POSITIVE,
            1.0,
            "(0, 1]",
        )?;
        crate::error::check_positive("time_per_point", integration_time)?;
        Ok(Self {
            detector_efficiency,
            integration_time,
            shot_noise,
        })
    }

    /// Counts a beam arriving at `arrival_rate` (before detector efficiency).
    pub fn measure(
        &self,
        setting: JointSetting,
        detector: Detector,
        arrival_rate: f64,
        seed: RngSeed,
    ) -> Result<CountRecord> {
        let mean_rate = arrival_rate * self.detector_efficiency;
        let observed_counts = if self.shot_noise {
            draw_detected_counts(
                arrival_rate,
                self.detector_efficiency,
                self.integration_time,
                seed,
            )?
        } else {
            check_rate_time(mean_rate, self.integration_time)?;
            (mean_rate * self.integration_time).round() as u64
        };
        Ok(CountRecord {
            setting,
            integration_time: self.integration_time,
            mean_rate,
            observed_counts,
            detector,
        })
    }
}

/// `x` printed with 12 significant digits in the shortest `%g`-style form.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        format!("{}e{exp}", trim_fraction(mantissa))
    } else {
        let decimals = (11 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The value that survives a write/read cycle at 12 significant digits.
pub fn recorded_value(x: f64) -> f64 {
    format_sig12(x).parse().expect("formatted float parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apparatus::make_path_dephasing;
    use crate::qcore::{apply_channel, prepare_bell_state};
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn bell_rate_extremes() {
        let bell = prepare_bell_state();
        let max = expected_rate(&bell, JointSetting::new(0.3, -0.3), 50.0, 0.99);
        assert!((max - 50.0 * 0.99).abs() < 1e-12);
        let zero = expected_rate(&bell, JointSetting::new(0.5, PI - 0.5), 50.0, 0.99);
        assert!(zero.abs() < 1e-12);
        let flat = apply_channel(&bell, &make_path_dephasing(0.0).unwrap());
        for k in 0..8 {
            let r = expected_rate(
                &flat,
                JointSetting::new(0.2 * k as f64, 0.7 * k as f64),
                50.0,
                0.99,
            );
            assert!((r - 50.0 * 0.99 / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rate_gives_zero_counts() {
        for i in 0..50 {
            assert_eq!(draw_counts(0.0, 100.0, RngSeed(i)).unwrap(), 0);
            assert_eq!(
                draw_detected_counts(0.0, 0.9, 100.0, RngSeed(i)).unwrap(),
                0
            );
        }
    }

    #[test]
    fn negative_inputs_rejected() {
        assert!(draw_counts(-1.0, 1.0, RngSeed(1)).is_err());
        assert!(draw_counts(1.0, -1.0, RngSeed(1)).is_err());
        assert!(draw_counts(f64::NAN, 1.0, RngSeed(1)).is_err());
        assert!(draw_counts(1e19, 1.0, RngSeed(1)).is_err());
    }

    #[test]
    fn seeded_draws_are_deterministic() {
        let a = draw_counts(123.4, 10.0, RngSeed(42)).unwrap();
        let b = draw_counts(123.4, 10.0, RngSeed(42)).unwrap();
        assert_eq!(a, b);
        let seeds: Vec<u64> = (0..16).map(|i| RngSeed(7).derive(3, i).0).collect();
        let mut uniq = seeds.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), seeds.len());
        assert_ne!(RngSeed(7).derive(3, 0), RngSeed(7).derive(4, 0));
    }

    #[test]
    fn large_mean_moments() {
        let n = 10_000;
        let mean = 1e6;
        let draws: Vec<f64> = (0..n)
            .map(|i| draw_counts(mean, 1.0, RngSeed(99).derive(0, i)).unwrap() as f64)
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(
            (m - mean).abs() < 3.0 * (mean / n as f64).sqrt(),
            "mean {m}"
        );
        let ratio = var / m;
        assert!((0.95..=1.05).contains(&ratio), "var/mean {ratio}");
    }

    #[test]
    fn thinning_preserves_poisson_mean() {
        let n = 20_000;
        let total: u64 = (0..n)
            .map(|i| draw_detected_counts(40.0, 0.5, 1.0, RngSeed(5).derive(1, i)).unwrap())
            .sum();
        let m = total as f64 / n as f64;
        assert!(
            (m - 20.0).abs() < 4.0 * (20.0 / n as f64).sqrt(),
            "mean {m}"
        );
    }

    #[test]
    fn noise_free_setup_rounds_mean() {
        let setup = CountingSetup::new(0.99, 150.0, false).unwrap();
        let rec = setup
            .measure(
                JointSetting::new(0.0, FRAC_PI_4),
                Detector::O,
                10.0,
                RngSeed(1),
            )
            .unwrap();
        assert_eq!(rec.observed_counts, 1485);
        assert!((rec.expected_counts() - 1485.0).abs() < 1e-9);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(FRAC_PI_4), "0.785398163397");
        assert_eq!(format_sig12(150.0), "150");
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(-2.5), "-2.5");
        assert_eq!(format_sig12(4.26e-6), "4.26e-6");
        assert_eq!(format_sig12(1.0e13), "1e13");
        assert_eq!(format_sig12(7.0 * PI / 4.0), "5.49778714378");
        for &x in &[FRAC_PI_4, 1.0 / 3.0, 2.3e-5, 123456.789012345, -7.77e-9] {
            let once = recorded_value(x);
            assert_eq!(recorded_value(once), once);
            assert!(((once - x) / x).abs() < 1e-11);
        }
    }

    #[test]
    fn detector_parse() {
        assert_eq!("O".parse::<Detector>().unwrap(), Detector::O);
        assert_eq!("H".parse::<Detector>().unwrap(), Detector::H);
        assert!("X".parse::<Detector>().is_err());
    }
}
