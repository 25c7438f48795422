//! Run configuration: a TOML document whose every key has a default, so an
//! empty file is a complete configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ifmsim_core::apparatus::{
    BeamParameters, CoilKind, LarmorCoil, Monochromator, PhysicalConstants, ThermalModel,
};
use ifmsim_core::counting::CountingSetup;
use ifmsim_core::procedures::{
    linear_grid, BellConfig, ContrastField, LarmorConfig, RasterConfig, RockingConfig,
    TemperatureConfig, TwoFlipperConfig,
};
use ifmsim_core::qcore::Path as BeamPath;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config is not valid TOML: {0}")]
    Parse(String),

    #[error("config key `{key}`: {message}")]
    Schema { key: String, message: String },

    #[error("config key `{key}` = {value} is outside {range}")]
    Range {
        key: String,
        value: String,
        range: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Where results are written unless `--out` or `IFMSIM_OUT` is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub beam: BeamConfig,
    pub coils: CoilConfig,
    pub noise: NoiseConfig,
    pub thermal: ThermalConfig,
    pub counting: CountingConfig,
    pub scan: ScanConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: None,
            beam: BeamConfig::default(),
            coils: CoilConfig::default(),
            noise: NoiseConfig::default(),
            thermal: ThermalConfig::default(),
            counting: CountingConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub wavelength_m: f64,
    pub prism_beam_separation_rad: f64,
    pub detector_efficiency: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            wavelength_m: 1.92e-10,
            prism_beam_separation_rad: 2.3e-5,
            detector_efficiency: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoilConfig {
    /// When absent, the length that turns the spin by π/2 at 0.33 mT.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_length_m: Option<f64>,
    pub field_per_ampere_t_per_a: f64,
    /// Path whose coil is calibrated by `larmor-cal`.
    pub path: BeamPath,
}

impl Default for CoilConfig {
    fn default() -> Self {
        Self {
            effective_length_m: None,
            field_per_ampere_t_per_a: 0.33e-3 / 0.7,
            path: BeamPath::I,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub contrast: f64,
    pub polarization: f64,
    pub flipper_efficiencies: Vec<f64>,
    pub analyzer_efficiency: f64,
    pub shot_noise: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            contrast: 0.91,
            polarization: 0.993,
            flipper_efficiencies: vec![0.98, 0.98],
            analyzer_efficiency: 1.0,
            shot_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    pub reference_temperature_c: f64,
    /// `[°C, contrast]` pairs, strictly increasing in temperature.
    pub anchors: Vec<[f64; 2]>,
    pub phase_drift_rad_per_c: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        Self {
            reference_temperature_c: 25.2,
            anchors: vec![[25.2, 0.88], [26.2, 0.60], [26.8, 0.33]],
            phase_drift_rad_per_c: 1.92,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CountingConfig {
    /// Neutrons/s reaching a detector for a fully transmitted outcome.
    pub base_rate_per_s: f64,
    pub time_per_point_s: f64,
}

impl Default for CountingConfig {
    fn default() -> Self {
        Self {
            base_rate_per_s: 50.0,
            time_per_point_s: 150.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub bell: BellScan,
    pub raster: RasterScan,
    pub temperature: TemperatureScan,
    pub rocking: RockingScan,
    pub two_flipper: TwoFlipperScan,
    pub larmor: LarmorScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellScan {
    pub fine_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_point_s: Option<f64>,
}

impl Default for BellScan {
    fn default() -> Self {
        Self {
            fine_points: 16,
            time_per_point_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RasterScan {
    pub x_min_mm: f64,
    pub x_max_mm: f64,
    pub z_min_mm: f64,
    pub z_max_mm: f64,
    pub step_mm: f64,
    pub aperture_mm: f64,
    pub chi_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_point_s: Option<f64>,
    pub field: ContrastField,
}

impl Default for RasterScan {
    fn default() -> Self {
        Self {
            x_min_mm: -5.0,
            x_max_mm: 5.0,
            z_min_mm: -5.0,
            z_max_mm: 5.0,
            step_mm: 1.0,
            aperture_mm: 3.0,
            chi_points: 16,
            time_per_point_s: None,
            field: ContrastField::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemperatureScan {
    pub t_min_c: f64,
    pub t_max_c: f64,
    pub step_c: f64,
    pub chi_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_point_s: Option<f64>,
}

impl Default for TemperatureScan {
    fn default() -> Self {
        Self {
            t_min_c: 25.2,
            t_max_c: 26.8,
            step_c: 0.2,
            chi_points: 16,
            time_per_point_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RockingScan {
    pub monochromator: Monochromator,
    pub coil: CoilKind,
    pub double_peak: bool,
    /// When absent, `beam.prism_beam_separation_rad`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation_rad: Option<f64>,
    pub angle_min_rad: f64,
    pub angle_max_rad: f64,
    pub step_rad: f64,
    pub peak_rate_per_s: f64,
    pub background_rate_per_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_point_s: Option<f64>,
}

impl Default for RockingScan {
    fn default() -> Self {
        Self {
            monochromator: Monochromator::SingleFold,
            coil: CoilKind::NoCoil,
            double_peak: false,
            separation_rad: None,
            angle_min_rad: -3e-5,
            angle_max_rad: 5e-5,
            step_rad: 5e-7,
            peak_rate_per_s: 200.0,
            background_rate_per_s: 2.0,
            time_per_point_s: Some(20.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoFlipperScan {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_point_s: Option<f64>,
}

impl Default for TwoFlipperScan {
    fn default() -> Self {
        Self {
            time_per_point_s: Some(600.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LarmorScan {
    pub current_min_a: f64,
    pub current_max_a: f64,
    pub step_a: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_per_point_s: Option<f64>,
}

impl Default for LarmorScan {
    fn default() -> Self {
        Self {
            current_min_a: -2.8,
            current_max_a: 2.8,
            step_a: 0.1,
            time_per_point_s: None,
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Parses and validates a configuration document. Duplicate keys are a TOML
/// error; unknown keys and wrong types are reported with their key path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        ConfigError::Schema {
            key: if key == "." { "(root)".into() } else { key },
            message: e.into_inner().message().to_string(),
        }
    })?;
    config.validate()?;
    Ok(config)
}

fn range(key: &str, value: f64, ok: bool, range: &'static str) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Range {
            key: key.into(),
            value: value.to_string(),
            range,
        })
    }
}

fn fraction(key: &str, v: f64) -> Result<(), ConfigError> {
    range(key, v, (0.0..=1.0).contains(&v), "[0, 1]")
}

fn efficiency(key: &str, v: f64) -> Result<(), ConfigError> {
    range(key, v, v > 0.0 && v <= 1.0, "(0, 1]")
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    range(key, v, v > 0.0, "(0, inf)")
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    range(key, v, true, "the finite numbers")
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    range(key, v, v >= 0.0, "[0, inf)")
}

fn grid(
    prefix: &str,
    lo: (&str, f64),
    hi: (&str, f64),
    step: (&str, f64),
) -> Result<(), ConfigError> {
    finite(&format!("{prefix}.{}", lo.0), lo.1)?;
    finite(&format!("{prefix}.{}", hi.0), hi.1)?;
    positive(&format!("{prefix}.{}", step.0), step.1)?;
    range(
        &format!("{prefix}.{}", hi.0),
        hi.1,
        hi.1 >= lo.1,
        "values not below the scan minimum",
    )?;
    let points = (hi.1 - lo.1) / step.1;
    range(
        &format!("{prefix}.{}", step.0),
        step.1,
        points < 1e6,
        "steps giving at most a million points",
    )
}

fn count(key: &str, n: usize, min: usize, range_text: &'static str) -> Result<(), ConfigError> {
    if n >= min && n <= 100_000 {
        Ok(())
    } else {
        Err(ConfigError::Range {
            key: key.into(),
            value: n.to_string(),
            range: range_text,
        })
    }
}

fn optional_time(key: &str, t: Option<f64>) -> Result<(), ConfigError> {
    t.map_or(Ok(()), |t| positive(key, t))
}

impl ExperimentConfig {
    /// Checks every physical range, naming the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = &self.beam;
        positive("beam.wavelength_m", b.wavelength_m)?;
        positive(
            "beam.prism_beam_separation_rad",
            b.prism_beam_separation_rad,
        )?;
        efficiency("beam.detector_efficiency", b.detector_efficiency)?;

        let c = &self.coils;
        if let Some(l) = c.effective_length_m {
            positive("coils.effective_length_m", l)?;
        }
        let f = c.field_per_ampere_t_per_a;
        range(
            "coils.field_per_ampere_t_per_a",
            f,
            f != 0.0,
            "the non-zero numbers",
        )?;

        let n = &self.noise;
        fraction("noise.contrast", n.contrast)?;
        fraction("noise.polarization", n.polarization)?;
        for (i, &e) in n.flipper_efficiencies.iter().enumerate() {
            fraction(&format!("noise.flipper_efficiencies[{i}]"), e)?;
        }
        efficiency("noise.analyzer_efficiency", n.analyzer_efficiency)?;

        let t = &self.thermal;
        finite("thermal.reference_temperature_c", t.reference_temperature_c)?;
        finite("thermal.phase_drift_rad_per_c", t.phase_drift_rad_per_c)?;
        if t.anchors.is_empty() {
            return Err(ConfigError::Schema {
                key: "thermal.anchors".into(),
                message: "at least one [temperature, contrast] anchor is required".into(),
            });
        }
        for (i, &[temp, contrast]) in t.anchors.iter().enumerate() {
            finite(&format!("thermal.anchors[{i}][0]"), temp)?;
            fraction(&format!("thermal.anchors[{i}][1]"), contrast)?;
            if i > 0 && temp <= t.anchors[i - 1][0] {
                return Err(ConfigError::Range {
                    key: format!("thermal.anchors[{i}][0]"),
                    value: temp.to_string(),
                    range: "temperatures above the previous anchor",
                });
            }
        }

        positive("counting.base_rate_per_s", self.counting.base_rate_per_s)?;
        positive("counting.time_per_point_s", self.counting.time_per_point_s)?;

        let s = &self.scan;
        count(
            "scan.bell.fine_points",
            s.bell.fine_points,
            5,
            "[5, 100000]",
        )?;
        optional_time("scan.bell.time_per_point_s", s.bell.time_per_point_s)?;

        let r = &s.raster;
        grid(
            "scan.raster",
            ("x_min_mm", r.x_min_mm),
            ("x_max_mm", r.x_max_mm),
            ("step_mm", r.step_mm),
        )?;
        grid(
            "scan.raster",
            ("z_min_mm", r.z_min_mm),
            ("z_max_mm", r.z_max_mm),
            ("step_mm", r.step_mm),
        )?;
        positive("scan.raster.aperture_mm", r.aperture_mm)?;
        count("scan.raster.chi_points", r.chi_points, 5, "[5, 100000]")?;
        optional_time("scan.raster.time_per_point_s", r.time_per_point_s)?;
        self.validate_field()?;

        let tp = &s.temperature;
        grid(
            "scan.temperature",
            ("t_min_c", tp.t_min_c),
            ("t_max_c", tp.t_max_c),
            ("step_c", tp.step_c),
        )?;
        count(
            "scan.temperature.chi_points",
            tp.chi_points,
            5,
            "[5, 100000]",
        )?;
        optional_time("scan.temperature.time_per_point_s", tp.time_per_point_s)?;
        let (lo, hi) = (t.anchors[0][0], t.anchors[t.anchors.len() - 1][0]);
        for (key, v) in [("t_min_c", tp.t_min_c), ("t_max_c", tp.t_max_c)] {
            range(
                &format!("scan.temperature.{key}"),
                v,
                v >= lo && v <= hi,
                "the thermal anchor range",
            )?;
        }

        let ro = &s.rocking;
        if let Some(sep) = ro.separation_rad {
            positive("scan.rocking.separation_rad", sep)?;
        }
        grid(
            "scan.rocking",
            ("angle_min_rad", ro.angle_min_rad),
            ("angle_max_rad", ro.angle_max_rad),
            ("step_rad", ro.step_rad),
        )?;
        positive("scan.rocking.peak_rate_per_s", ro.peak_rate_per_s)?;
        non_negative(
            "scan.rocking.background_rate_per_s",
            ro.background_rate_per_s,
        )?;
        optional_time("scan.rocking.time_per_point_s", ro.time_per_point_s)?;

        optional_time(
            "scan.two_flipper.time_per_point_s",
            s.two_flipper.time_per_point_s,
        )?;

        let l = &s.larmor;
        grid(
            "scan.larmor",
            ("current_min_a", l.current_min_a),
            ("current_max_a", l.current_max_a),
            ("step_a", l.step_a),
        )?;
        optional_time("scan.larmor.time_per_point_s", l.time_per_point_s)?;
        Ok(())
    }

    fn validate_field(&self) -> Result<(), ConfigError> {
        let key = |k: &str| format!("scan.raster.field.{k}");
        match self.scan.raster.field {
            ContrastField::Uniform { contrast } => fraction(&key("contrast"), contrast),
            ContrastField::Gaussian {
                peak,
                floor,
                center_x,
                center_z,
                sigma_x,
                sigma_z,
            } => {
                fraction(&key("peak"), peak)?;
                fraction(&key("floor"), floor)?;
                finite(&key("center_x"), center_x)?;
                finite(&key("center_z"), center_z)?;
                positive(&key("sigma_x"), sigma_x)?;
                positive(&key("sigma_z"), sigma_z)
            }
        }
    }

    fn counting_setup(&self, time: Option<f64>) -> ifmsim_core::Result<CountingSetup> {
        CountingSetup::new(
            self.beam.detector_efficiency,
            time.unwrap_or(self.counting.time_per_point_s),
            self.noise.shot_noise,
        )
    }

    pub fn beam_parameters(&self) -> ifmsim_core::Result<BeamParameters> {
        BeamParameters::new(
            PhysicalConstants::CODATA_2018,
            self.beam.wavelength_m,
            self.beam.prism_beam_separation_rad,
            self.beam.detector_efficiency,
        )
    }

    pub fn bell(&self) -> ifmsim_core::Result<BellConfig> {
        Ok(BellConfig {
            contrast: self.noise.contrast,
            polarization: self.noise.polarization,
            flipper_efficiencies: self.noise.flipper_efficiencies.clone(),
            base_rate: self.counting.base_rate_per_s,
            counting: self.counting_setup(self.scan.bell.time_per_point_s)?,
            fine_points: self.scan.bell.fine_points,
        })
    }

    pub fn raster(&self) -> ifmsim_core::Result<RasterConfig> {
        let r = &self.scan.raster;
        Ok(RasterConfig {
            field: r.field,
            aperture: r.aperture_mm,
            x_positions: linear_grid(r.x_min_mm, r.x_max_mm, r.step_mm)?,
            z_positions: linear_grid(r.z_min_mm, r.z_max_mm, r.step_mm)?,
            chi_points: r.chi_points,
            base_rate: self.counting.base_rate_per_s,
            counting: self.counting_setup(r.time_per_point_s)?,
        })
    }

    pub fn thermal_model(&self) -> ifmsim_core::Result<ThermalModel> {
        let t = &self.thermal;
        ThermalModel::new(
            t.reference_temperature_c,
            t.anchors.iter().map(|&[temp, c]| (temp, c)).collect(),
            t.phase_drift_rad_per_c,
        )
    }

    pub fn temperature(&self) -> ifmsim_core::Result<TemperatureConfig> {
        let s = &self.scan.temperature;
        // the last grid point may overshoot t_max by rounding; keep it in range
        let (_, hi) = self.thermal_model()?.range();
        let temperatures = linear_grid(s.t_min_c, s.t_max_c, s.step_c)?
            .into_iter()
            .map(|t| t.min(hi))
            .collect();
        Ok(TemperatureConfig {
            thermal: self.thermal_model()?,
            temperatures,
            chi_points: s.chi_points,
            base_rate: self.counting.base_rate_per_s,
            counting: self.counting_setup(s.time_per_point_s)?,
        })
    }

    pub fn rocking(&self) -> ifmsim_core::Result<RockingConfig> {
        let r = &self.scan.rocking;
        Ok(RockingConfig {
            monochromator: r.monochromator,
            coil: r.coil,
            double_peak: r.double_peak,
            separation: r
                .separation_rad
                .unwrap_or(self.beam.prism_beam_separation_rad),
            peak_rate: r.peak_rate_per_s,
            background_rate: r.background_rate_per_s,
            angles: linear_grid(r.angle_min_rad, r.angle_max_rad, r.step_rad)?,
            counting: self.counting_setup(r.time_per_point_s)?,
        })
    }

    pub fn two_flipper(&self) -> ifmsim_core::Result<TwoFlipperConfig> {
        let f = &self.noise.flipper_efficiencies;
        if f.len() != 2 {
            return Err(ifmsim_core::Error::InvalidInput(format!(
                "the two-flipper analysis needs 2 entries in noise.flipper_efficiencies, got {}",
                f.len()
            )));
        }
        Ok(TwoFlipperConfig {
            polarization: self.noise.polarization,
            flipper_efficiencies: (f[0], f[1]),
            analyzer_efficiency: self.noise.analyzer_efficiency,
            base_rate: self.counting.base_rate_per_s,
            counting: self.counting_setup(self.scan.two_flipper.time_per_point_s)?,
        })
    }

    pub fn larmor(&self) -> ifmsim_core::Result<LarmorConfig> {
        let beam = self.beam_parameters()?;
        let calibrated = LarmorCoil::calibrated(&beam);
        let coil = LarmorCoil::new(
            self.coils
                .effective_length_m
                .unwrap_or(calibrated.effective_length),
            self.coils.field_per_ampere_t_per_a,
            0.0,
        )?;
        let l = &self.scan.larmor;
        Ok(LarmorConfig {
            beam,
            coil,
            path: self.coils.path,
            currents: linear_grid(l.current_min_a, l.current_max_a, l.step_a)?,
            base_rate: self.counting.base_rate_per_s,
            counting: self.counting_setup(l.time_per_point_s)?,
        })
    }

    /// The configuration as echoed into run artifacts: everything that
    /// determines the results, without the output location.
    pub fn echo(&self) -> Self {
        Self {
            output_dir: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range_key(text: &str) -> String {
        match parse_config(text) {
            Err(ConfigError::Range { key, .. }) => key,
            other => panic!("expected a range error, got {other:?}"),
        }
    }

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.beam.wavelength_m, 1.92e-10);
        assert_eq!(c.noise.contrast, 0.91);
        assert_eq!(c.noise.polarization, 0.993);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn range_errors_name_the_key() {
        assert_eq!(range_key("[noise]\ncontrast = 1.3\n"), "noise.contrast");
        assert_eq!(
            range_key("[noise]\nflipper_efficiencies = [0.9, -0.1]\n"),
            "noise.flipper_efficiencies[1]"
        );
        assert_eq!(
            range_key("[counting]\ntime_per_point_s = 0.0\n"),
            "counting.time_per_point_s"
        );
        assert_eq!(
            range_key("[scan.raster.field]\nkind = \"uniform\"\ncontrast = 2.0\n"),
            "scan.raster.field.contrast"
        );
        assert_eq!(
            range_key("[scan.temperature]\nt_max_c = 30.0\n"),
            "scan.temperature.t_max_c"
        );
        assert_eq!(
            range_key("[thermal]\nanchors = [[26.0, 0.5], [25.0, 0.6]]\n"),
            "thermal.anchors[1][0]"
        );
    }

    #[test]
    fn schema_errors_name_the_key() {
        match parse_config("[noise]\ncontrats = 0.5\n") {
            Err(ConfigError::Schema { key, message }) => {
                assert!(key.starts_with("noise"), "{key}");
                assert!(message.contains("contrats"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        match parse_config("[beam]\nwavelength_m = \"long\"\n") {
            Err(ConfigError::Schema { key, .. }) => assert_eq!(key, "beam.wavelength_m"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("bogus = 1\n"),
            Err(ConfigError::Schema { .. })
        ));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse_config("[noise]\ncontrast = 0.5\ncontrast = 0.6\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err:?}");
    }

    #[test]
    fn echo_round_trips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.seed = u64::MAX;
        c.output_dir = Some("elsewhere".into());
        c.scan.raster.field = ContrastField::Uniform { contrast: 0.5 };
        c.coils.effective_length_m = Some(0.123_456_789_012_345_6);
        let text = toml::to_string(&c.echo()).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, c.echo());
    }

    #[test]
    fn builders_match_defaults() {
        let c = ExperimentConfig::default();
        let bell = c.bell().unwrap();
        assert_eq!(bell.counting.integration_time, 150.0);
        assert_eq!(bell.flipper_efficiencies, vec![0.98, 0.98]);
        assert_eq!(c.raster().unwrap().x_positions.len(), 11);
        assert_eq!(c.temperature().unwrap().temperatures.len(), 9);
        assert_eq!(c.rocking().unwrap().counting.integration_time, 20.0);
        assert_eq!(c.two_flipper().unwrap().counting.integration_time, 600.0);
        let l = c.larmor().unwrap();
        assert_eq!(l.currents.len(), 57);
        assert_eq!(
            l.coil.effective_length,
            LarmorCoil::calibrated(&l.beam).effective_length
        );
    }
}
