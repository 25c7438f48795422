//! Scripted measurement procedures. Each one builds a [`ScanPlan`], counts
//! every grid point from its own derived seed and analyzes the result, so a
//! run is a pure function of its configuration and seed.

mod bell;
mod flipper;
mod fringes;
mod larmor;
mod plan;
mod raster;
mod rocking;
mod temperature;

pub use bell::{
    analyze_bell_fringes, analyze_bell_records, run_bell_experiment, BellConfig, BellRun,
    BELL_ALPHAS, BELL_CHIS,
};
pub use flipper::{
    estimate_flipper_parameters, invert_flipping_ratios, run_two_flipper_analysis, Estimate,
    FlipperParameters, TwoFlipperConfig, TwoFlipperRun,
};
pub use larmor::{calibration_state, run_larmor_calibration, LarmorConfig, LarmorRun};
pub use plan::{linear_grid, phase_grid, ScanKind, ScanPlan, ScanRecord};
pub use raster::{run_raster_scan, ContrastField, RasterConfig, RasterMap, RasterRun};
pub use rocking::{run_rocking_scan, RockingConfig, RockingRun};
pub use temperature::{
    fit_line, phase_drift, run_temperature_scan, unwrap_phases, PhaseDrift, TemperatureConfig,
    TemperaturePoint, TemperatureRun,
};
