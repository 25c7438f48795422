use serde::{Deserialize, Serialize};

use super::fringes::{fringe_state, measure_fringe_point};
use super::plan::{phase_grid, ScanKind, ScanPlan, ScanRecord};
use crate::analysis::{fit_fringe, FringeFit};
use crate::counting::{CountRecord, CountingSetup, RngSeed};
use crate::error::{check_positive, check_range, Error, Result};

/// Interference contrast as a function of beam position (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContrastField {
    Uniform {
        contrast: f64,
    },
    /// `floor + (peak − floor)·exp(−½[(x−x₀)²/σx² + (z−z₀)²/σz²])`.
    Gaussian {
        peak: f64,
        floor: f64,
        center_x: f64,
        center_z: f64,
        sigma_x: f64,
        sigma_z: f64,
    },
}

impl Default for ContrastField {
    /// Sweet spot of contrast 0.82 at the origin of the scan.
    fn default() -> Self {
        ContrastField::Gaussian {
            peak: 0.82,
            floor: 0.05,
            center_x: 0.0,
            center_z: 0.0,
            sigma_x: 2.5,
            sigma_z: 3.5,
        }
    }
}

impl ContrastField {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ContrastField::Uniform { contrast } => {
                check_range("contrast", contrast, 0.0, 1.0, "[0, 1]")?;
            }
            ContrastField::Gaussian {
                peak,
                floor,
                center_x,
                center_z,
                sigma_x,
                sigma_z,
            } => {
                check_range("peak", peak, 0.0, 1.0, "[0, 1]")?;
                check_range("floor", floor, 0.0, 1.0, "[0, 1]")?;
                check_positive("sigma_x", sigma_x)?;
                check_positive("sigma_z", sigma_z)?;
                if !(center_x.is_finite() && center_z.is_finite()) {
                    return Err(Error::InvalidInput(
                        "contrast field center must be finite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn contrast_at(&self, x: f64, z: f64) -> f64 {
        match *self {
            ContrastField::Uniform { contrast } => contrast,
            ContrastField::Gaussian {
                peak,
                floor,
                center_x,
                center_z,
                sigma_x,
                sigma_z,
            } => {
                let u = (x - center_x) / sigma_x;
                let v = (z - center_z) / sigma_z;
                floor + (peak - floor) * (-0.5 * (u * u + v * v)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterConfig {
    pub field: ContrastField,
    /// Side of the square beam aperture, mm. The contrast of a cell is the
    /// field at the aperture center.
    pub aperture: f64,
    pub x_positions: Vec<f64>,
    pub z_positions: Vec<f64>,
    pub chi_points: usize,
    pub base_rate: f64,
    pub counting: CountingSetup,
}

/// Fitted contrast on the scan grid; `contrast_grid[iz][ix]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterMap {
    pub x_positions: Vec<f64>,
    pub z_positions: Vec<f64>,
    pub contrast_grid: Vec<Vec<f64>>,
}

impl RasterMap {
    /// `(x, z, contrast)` of the highest cell.
    pub fn max_cell(&self) -> (f64, f64, f64) {
        let mut best = (self.x_positions[0], self.z_positions[0], f64::NEG_INFINITY);
        for (iz, row) in self.contrast_grid.iter().enumerate() {
            for (ix, &c) in row.iter().enumerate() {
                if c > best.2 {
                    best = (self.x_positions[ix], self.z_positions[iz], c);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterRun {
    pub plan: ScanPlan,
    pub aperture: f64,
    /// Grid order: z outermost, then x, then χ.
    pub records: Vec<ScanRecord>,
    /// `fits[iz][ix]`.
    pub fits: Vec<Vec<FringeFit>>,
    pub map: RasterMap,
}

/// Fits one fringe per `(x, z)` cell and collects the contrasts. The fitted
/// contrast is clamped into `[0, 1]` on the map, the raw fit is kept in
/// `fits`.
pub fn run_raster_scan(config: &RasterConfig, seed: RngSeed) -> Result<RasterRun> {
    config.field.validate()?;
    check_positive("aperture", config.aperture)?;
    check_positive("base_rate", config.base_rate)?;
    if config.x_positions.is_empty() || config.z_positions.is_empty() {
        return Err(Error::InvalidInput(
            "raster scan needs x and z positions".into(),
        ));
    }
    let chis = phase_grid(config.chi_points);
    let mut grid = Vec::new();
    for &z in &config.z_positions {
        for &x in &config.x_positions {
            for &c in &chis {
                grid.push(vec![x, z, c]);
            }
        }
    }
    let plan = ScanPlan::new(
        ScanKind::Raster,
        grid,
        config.counting.integration_time,
        seed,
    )?;
    let records = plan.execute(|p, s| {
        let state = fringe_state(config.field.contrast_at(p[0], p[1]), 0.0)?;
        measure_fringe_point(&state, p, p[2], config.base_rate, &config.counting, s)
    })?;

    let nx = config.x_positions.len();
    let cells: Vec<FringeFit> = records
        .chunks(chis.len())
        .map(|rows| fit_fringe(&rows.iter().map(|r| r.record).collect::<Vec<CountRecord>>()))
        .collect::<Result<_>>()?;
    let fits: Vec<Vec<FringeFit>> = cells.chunks(nx).map(|r| r.to_vec()).collect();
    let contrast_grid = fits
        .iter()
        .map(|row| row.iter().map(|f| f.contrast.clamp(0.0, 1.0)).collect())
        .collect();
    let x_positions = plan.grid[..nx * chis.len()]
        .iter()
        .step_by(chis.len())
        .map(|p| p[0])
        .collect();
    let z_positions = plan
        .grid
        .iter()
        .step_by(nx * chis.len())
        .map(|p| p[1])
        .collect();
    Ok(RasterRun {
        aperture: config.aperture,
        map: RasterMap {
            x_positions,
            z_positions,
            contrast_grid,
        },
        plan,
        records,
        fits,
    })
}
