use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interferometer response to the cooling-water temperature of the Larmor
/// boxes: contrast through piecewise-linear anchors, phase through a linear
/// drift rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalModel {
    /// °C at which the thermal phase shift is zero.
    pub reference_temperature: f64,
    /// (°C, contrast) anchors, strictly increasing in temperature.
    anchors: Vec<(f64, f64)>,
    /// rad/°C.
    pub phase_drift_rate: f64,
}

impl ThermalModel {
    pub fn new(
        reference_temperature: f64,
        anchors: Vec<(f64, f64)>,
        phase_drift_rate: f64,
    ) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidInput(
                "thermal model needs at least one anchor".into(),
            ));
        }
        for &(t, c) in &anchors {
            if !t.is_finite() || !(0.0..=1.0).contains(&c) {
                return Err(Error::OutOfRange {
                    name: "thermal.anchors",
                    value: c,
                    range: "[0, 1]",
                });
            }
        }
        if anchors.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput(
                "thermal anchor temperatures must be strictly increasing".into(),
            ));
        }
        if !reference_temperature.is_finite() || !phase_drift_rate.is_finite() {
            return Err(Error::InvalidInput(
                "thermal parameters must be finite".into(),
            ));
        }
        Ok(Self {
            reference_temperature,
            anchors,
            phase_drift_rate,
        })
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    /// Temperature range covered by the anchors.
    pub fn range(&self) -> (f64, f64) {
        (self.anchors[0].0, self.anchors[self.anchors.len() - 1].0)
    }

    /// Piecewise-linear contrast; temperatures outside the anchors are an error.
    pub fn contrast_at(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfRange {
                name: "temperature",
                value: t,
                range: "the thermal anchor range",
            });
        }
        let k = self.anchors.partition_point(|&(ta, _)| ta <= t);
        if k == self.anchors.len() {
            return Ok(self.anchors[k - 1].1);
        }
        let (t0, c0) = self.anchors[k - 1];
        let (t1, c1) = self.anchors[k];
        Ok(c0 + (c1 - c0) * (t - t0) / (t1 - t0))
    }

    /// Phase accumulated relative to the reference temperature, rad.
    pub fn phase_shift(&self, t: f64) -> f64 {
        self.phase_drift_rate * (t - self.reference_temperature)
    }
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self::new(25.2, vec![(25.2, 0.88), (26.2, 0.60), (26.8, 0.33)], 1.92)
            .expect("default thermal model is valid")
    }
}
