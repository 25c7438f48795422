use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{recorded_value, CountRecord, RngSeed};
use crate::error::{check_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Bell,
    Raster,
    Temperature,
    Rocking,
    TwoFlipper,
    LarmorCalibration,
}

impl ScanKind {
    /// Names of the coordinates of one grid point.
    pub fn coordinates(self) -> &'static [&'static str] {
        match self {
            ScanKind::Bell => &["alpha_rad", "chi_rad"],
            ScanKind::Raster => &["x_mm", "z_mm", "chi_rad"],
            ScanKind::Temperature => &["temperature_c", "chi_rad"],
            ScanKind::Rocking => &["angle_rad"],
            ScanKind::TwoFlipper => &["flipper1", "flipper2"],
            ScanKind::LarmorCalibration => &["current_a"],
        }
    }

    /// Seed stream of the counts drawn for this kind of scan.
    pub fn stream(self) -> u64 {
        match self {
            ScanKind::Bell => 1,
            ScanKind::Raster => 2,
            ScanKind::Temperature => 3,
            ScanKind::Rocking => 4,
            ScanKind::TwoFlipper => 5,
            ScanKind::LarmorCalibration => 6,
        }
    }
}

/// Ordered list of measurement points. Point `k` draws its counts from
/// `seed.derive(kind.stream(), k)`, so results do not depend on the order in
/// which points are simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    pub kind: ScanKind,
    pub grid: Vec<Vec<f64>>,
    /// s.
    pub time_per_point: f64,
    pub seed: RngSeed,
}

impl ScanPlan {
    /// Validates the plan; every coordinate is stored as it will be recorded
    /// in a counts table.
    pub fn new(
        kind: ScanKind,
        grid: Vec<Vec<f64>>,
        time_per_point: f64,
        seed: RngSeed,
    ) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{kind:?} scan has an empty grid"
            )));
        }
        check_positive("time_per_point", time_per_point)?;
        let arity = kind.coordinates().len();
        let mut grid = grid;
        for point in &mut grid {
            if point.len() != arity {
                return Err(Error::InvalidInput(format!(
                    "{kind:?} grid point has {} coordinates, expected {arity}",
                    point.len()
                )));
            }
            if point.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{kind:?} grid point is not finite"
                )));
            }
            for v in point.iter_mut() {
                *v = recorded_value(*v);
            }
        }
        Ok(Self {
            kind,
            grid,
            time_per_point,
            seed,
        })
    }

    pub fn point_seed(&self, index: usize) -> RngSeed {
        self.seed.derive(self.kind.stream(), index as u64)
    }

    /// Runs `measure` on every grid point, in parallel, returning results in
    /// grid order.
    pub fn execute<T, F>(&self, measure: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[f64], RngSeed) -> Result<T> + Sync,
    {
        self.grid
            .par_iter()
            .enumerate()
            .map(|(k, point)| measure(point, self.point_seed(k)))
            .collect()
    }
}

/// One count record together with the grid point it was taken at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub coordinates: Vec<f64>,
    pub record: CountRecord,
}

/// `lo, lo + step, …` up to `hi` inclusive, each point computed as
/// `lo + k·step` so no error accumulates.
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    check_positive("step", step)?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidInput(format!(
            "grid bounds [{lo}, {hi}] are invalid"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let v = lo + k as f64 * step;
            // a point meant to be zero must not carry the rounding of lo
            if v.abs() < 1e-9 * step {
                0.0
            } else {
                v
            }
        })
        .collect())
}

/// `n` equally spaced phases `k·2π/n` covering one period.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| k as f64 * std::f64::consts::TAU / n as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_validation() {
        let seed = RngSeed(1);
        assert!(ScanPlan::new(ScanKind::Rocking, vec![], 1.0, seed).is_err());
        assert!(ScanPlan::new(ScanKind::Rocking, vec![vec![0.0]], 0.0, seed).is_err());
        assert!(ScanPlan::new(ScanKind::Bell, vec![vec![0.0]], 1.0, seed).is_err());
        assert!(ScanPlan::new(ScanKind::Rocking, vec![vec![f64::NAN]], 1.0, seed).is_err());
        let plan = ScanPlan::new(
            ScanKind::Bell,
            vec![vec![0.0, 0.785_398_163_397_448_3]],
            1.0,
            seed,
        )
        .unwrap();
        assert_eq!(plan.grid[0][1], recorded_value(std::f64::consts::FRAC_PI_4));
    }

    #[test]
    fn execute_keeps_grid_order() {
        let grid: Vec<Vec<f64>> = (0..200).map(|k| vec![k as f64]).collect();
        let plan = ScanPlan::new(ScanKind::LarmorCalibration, grid, 1.0, RngSeed(5)).unwrap();
        let out = plan.execute(|p, s| Ok((p[0], s))).unwrap();
        for (k, (v, s)) in out.iter().enumerate() {
            assert_eq!(*v, k as f64);
            assert_eq!(*s, RngSeed(5).derive(6, k as u64));
        }
    }

    #[test]
    fn grids() {
        let g = linear_grid(-5.0, 5.0, 1.0).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 5.0);
        assert_eq!(linear_grid(-2.8, 2.8, 0.1).unwrap()[28], 0.0);
        assert_eq!(linear_grid(25.2, 26.8, 0.2).unwrap().len(), 9);
        assert!(linear_grid(1.0, 0.0, 0.1).is_err());
        assert_eq!(phase_grid(16)[2], std::f64::consts::FRAC_PI_4);
    }
}
