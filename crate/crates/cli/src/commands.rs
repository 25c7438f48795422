//! Subcommands. Each produces a summary and a set of tables; the offline
//! `fit` analysis of a counts table reuses the summary and table builders of
//! the simulating subcommands, so both write identical analysis results.

use std::f64::consts::TAU;

use ifmsim_core::analysis::{
    fit_fringe, fit_gaussian_peaks, fit_sinusoid, BellResult, FringeFit, PeakFit, SinusoidFit,
};
use ifmsim_core::counting::{format_sig12, CountRecord, Detector, RngSeed};
use ifmsim_core::procedures::{
    analyze_bell_fringes, analyze_bell_records, estimate_flipper_parameters, phase_drift,
    run_bell_experiment, run_larmor_calibration, run_raster_scan, run_rocking_scan,
    run_temperature_scan, run_two_flipper_analysis, Estimate, PhaseDrift, RasterMap, ScanKind,
    ScanRecord, BELL_ALPHAS,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::report::{csv_text, real, Summary};
use crate::table::{CountsRow, CountsTable};

/// Everything a subcommand computed, before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    /// `(file name, contents)`, the counts table first.
    pub tables: Vec<(String, String)>,
}

fn invalid(message: impl Into<String>) -> CliError {
    CliError::Simulation(ifmsim_core::Error::InvalidInput(message.into()))
}

/// Rows sharing detector, spin angle and every extra coordinate: one fringe
/// scanned over χ. Groups are listed in order of first appearance and keep
/// the row order of the table.
#[derive(Debug, Clone)]
struct FringeGroup {
    detector: Detector,
    alpha: f64,
    extras: Vec<f64>,
    records: Vec<CountRecord>,
}

fn fringe_groups(table: &CountsTable) -> Vec<FringeGroup> {
    let mut groups: Vec<FringeGroup> = Vec::new();
    for CountsRow { record, extras } in &table.rows {
        let found = groups.iter_mut().find(|g| {
            g.detector == record.detector && g.alpha == record.setting.alpha && &g.extras == extras
        });
        match found {
            Some(g) => g.records.push(*record),
            None => groups.push(FringeGroup {
                detector: record.detector,
                alpha: record.setting.alpha,
                extras: extras.clone(),
                records: vec![*record],
            }),
        }
    }
    groups
}

fn fringe_table(
    extra_columns: &[String],
    groups: &[FringeGroup],
    fits: &[FringeFit],
) -> Result<String, CliError> {
    let mut header = vec!["detector", "alpha_rad"];
    header.extend(extra_columns.iter().map(String::as_str));
    header.extend([
        "offset",
        "offset_sigma",
        "amplitude",
        "amplitude_sigma",
        "phase_rad",
        "phase_sigma_rad",
        "contrast",
        "contrast_sigma",
        "chi_square",
        "dof",
    ]);
    let rows: Vec<Vec<String>> = groups
        .iter()
        .zip(fits)
        .map(|(g, f)| {
            let mut row = vec![g.detector.as_str().to_string(), format_sig12(g.alpha)];
            row.extend(g.extras.iter().map(|&v| format_sig12(v)));
            row.extend([
                real(f.offset),
                real(f.offset_sigma()),
                real(f.amplitude),
                real(f.amplitude_sigma()),
                real(f.phase),
                real(f.phase_sigma()),
                real(f.contrast),
                real(f.contrast_sigma()),
                real(f.chi_square),
                f.dof.to_string(),
            ]);
            row
        })
        .collect();
    csv_text(&header, &rows)
}

fn total_counts(table: &CountsTable) -> u64 {
    table.rows.iter().map(|r| r.record.observed_counts).sum()
}

fn counts_file(table: &CountsTable) -> Result<(String, String), CliError> {
    Ok(("counts.csv".into(), table.to_csv()?))
}

fn bell_summary(s: &mut Summary, result: &BellResult, fringe: &BellResult) {
    s.num("s", result.s_value);
    s.num("s_sigma", result.s_sigma);
    s.num("n_sigma_violation", result.n_sigma_violation);
    for (k, e) in result.e.iter().enumerate() {
        s.num(format!("e{}_alpha_rad", k + 1), e.setting.alpha);
        s.num(format!("e{}_chi_rad", k + 1), e.setting.chi);
        s.num(format!("e{}", k + 1), e.value);
        s.num(format!("e{}_sigma", k + 1), e.sigma);
    }
    s.num("s_fringe_fit", fringe.s_value);
    s.num("s_fringe_fit_sigma", fringe.s_sigma);
    s.num("n_sigma_violation_fringe_fit", fringe.n_sigma_violation);
}

pub fn bell(config: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let run = run_bell_experiment(&config.bell()?, RngSeed(seed))?;
    let table = CountsTable::from_scan(ScanKind::Bell, &run.records);
    let groups = fringe_groups(&table);
    let fits: Vec<FringeFit> = run.fringes.iter().map(|(_, f)| *f).collect();
    let mut s = Summary::default();
    s.text("analysis", "bell");
    s.num("visibility", run.visibility);
    s.num("s_predicted", run.analytic_s);
    bell_summary(&mut s, &run.result, &run.fringe_result);
    s.int("total_counts", total_counts(&table));
    Ok(Outcome {
        summary: s,
        tables: vec![
            counts_file(&table)?,
            (
                "fits.csv".into(),
                fringe_table(&table.extra_columns, &groups, &fits)?,
            ),
        ],
    })
}

fn raster_summary(s: &mut Summary, map: &RasterMap) {
    let (x, z, c) = map.max_cell();
    s.num("max_contrast", c);
    s.num("max_x_mm", x);
    s.num("max_z_mm", z);
    s.int("n_x", map.x_positions.len() as u64);
    s.int("n_z", map.z_positions.len() as u64);
}

fn contrast_map_table(map: &RasterMap, fits: &[Vec<FringeFit>]) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for (iz, &z) in map.z_positions.iter().enumerate() {
        for (ix, &x) in map.x_positions.iter().enumerate() {
            rows.push(vec![
                format_sig12(x),
                format_sig12(z),
                real(map.contrast_grid[iz][ix]),
                real(fits[iz][ix].contrast_sigma()),
            ]);
        }
    }
    csv_text(&["x_mm", "z_mm", "contrast", "contrast_sigma"], &rows)
}

pub fn raster(config: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let run = run_raster_scan(&config.raster()?, RngSeed(seed))?;
    let table = CountsTable::from_scan(ScanKind::Raster, &run.records);
    let groups = fringe_groups(&table);
    let fits: Vec<FringeFit> = run.fits.iter().flatten().copied().collect();
    let mut s = Summary::default();
    s.text("analysis", "raster");
    s.num("aperture_mm", run.aperture);
    raster_summary(&mut s, &run.map);
    s.int("total_counts", total_counts(&table));
    Ok(Outcome {
        summary: s,
        tables: vec![
            counts_file(&table)?,
            (
                "fits.csv".into(),
                fringe_table(&table.extra_columns, &groups, &fits)?,
            ),
            (
                "contrast_map.csv".into(),
                contrast_map_table(&run.map, &run.fits)?,
            ),
        ],
    })
}

fn temperature_summary(s: &mut Summary, fits: &[(f64, FringeFit)], drift: Option<&PhaseDrift>) {
    s.int("n_temperatures", fits.len() as u64);
    for (t, f) in fits {
        s.num(format!("contrast_at_{}", format_sig12(*t)), f.contrast);
        s.num(
            format!("contrast_at_{}_sigma", format_sig12(*t)),
            f.contrast_sigma(),
        );
    }
    if let Some(d) = drift {
        s.num("phase_slope_rad_per_c", d.slope);
        s.num("phase_slope_sigma_rad_per_c", d.slope_sigma);
        s.num("phase_intercept_rad", d.intercept);
    }
}

fn temperature_table(fits: &[(f64, FringeFit)], unwrapped: &[f64]) -> Result<String, CliError> {
    let rows: Vec<Vec<String>> = fits
        .iter()
        .zip(unwrapped)
        .map(|((t, f), &u)| {
            vec![
                format_sig12(*t),
                real(f.contrast),
                real(f.contrast_sigma()),
                real(u),
                real(f.phase_sigma()),
            ]
        })
        .collect();
    csv_text(
        &[
            "temperature_c",
            "contrast",
            "contrast_sigma",
            "phase_unwrapped_rad",
            "phase_sigma_rad",
        ],
        &rows,
    )
}

pub fn temperature(config: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let run = run_temperature_scan(&config.temperature()?, RngSeed(seed))?;
    let table = CountsTable::from_scan(ScanKind::Temperature, &run.records);
    let groups = fringe_groups(&table);
    let pairs: Vec<(f64, FringeFit)> = run.points.iter().map(|p| (p.temperature, p.fit)).collect();
    let fits: Vec<FringeFit> = pairs.iter().map(|p| p.1).collect();
    let unwrapped: Vec<f64> = run.points.iter().map(|p| p.unwrapped_phase).collect();
    let mut s = Summary::default();
    s.text("analysis", "temperature");
    s.num(
        "model_phase_drift_rad_per_c",
        config.thermal.phase_drift_rad_per_c,
    );
    temperature_summary(&mut s, &pairs, run.drift.as_ref());
    s.int("total_counts", total_counts(&table));
    Ok(Outcome {
        summary: s,
        tables: vec![
            counts_file(&table)?,
            (
                "fits.csv".into(),
                fringe_table(&table.extra_columns, &groups, &fits)?,
            ),
            (
                "temperature.csv".into(),
                temperature_table(&pairs, &unwrapped)?,
            ),
        ],
    })
}

fn peaks_summary(s: &mut Summary, fit: &PeakFit) {
    s.int("n_peaks", fit.peaks.len() as u64);
    s.num("background", fit.background);
    s.num("background_sigma", fit.background_sigma);
    for (k, p) in fit.peaks.iter().enumerate() {
        let n = k + 1;
        s.num(format!("peak{n}_center_rad"), p.center);
        s.num(format!("peak{n}_center_sigma_rad"), p.center_sigma);
        s.num(format!("peak{n}_fwhm_rad"), p.fwhm);
        s.num(format!("peak{n}_fwhm_sigma_rad"), p.fwhm_sigma);
        s.num(format!("peak{n}_height"), p.height);
        s.num(format!("peak{n}_height_sigma"), p.height_sigma);
    }
    if let [a, b] = fit.peaks[..] {
        s.num("peak_separation_rad", b.center - a.center);
        s.num(
            "peak_separation_sigma_rad",
            a.center_sigma.hypot(b.center_sigma),
        );
    }
    s.num("chi_square", fit.chi_square);
    s.int("dof", fit.dof as u64);
}

fn peaks_table(fit: &PeakFit) -> Result<String, CliError> {
    let rows: Vec<Vec<String>> = fit
        .peaks
        .iter()
        .enumerate()
        .map(|(k, p)| {
            vec![
                (k + 1).to_string(),
                real(p.center),
                real(p.center_sigma),
                real(p.fwhm),
                real(p.fwhm_sigma),
                real(p.height),
                real(p.height_sigma),
            ]
        })
        .collect();
    csv_text(
        &[
            "peak",
            "center_rad",
            "center_sigma_rad",
            "fwhm_rad",
            "fwhm_sigma_rad",
            "height",
            "height_sigma",
        ],
        &rows,
    )
}

pub fn rocking(config: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let cfg = config.rocking()?;
    let run = run_rocking_scan(&cfg, RngSeed(seed))?;
    let table = CountsTable::from_scan(ScanKind::Rocking, &run.records);
    let mut s = Summary::default();
    s.text("analysis", "rocking");
    for (k, p) in run.true_peaks.iter().enumerate() {
        s.num(format!("configured_peak{}_fwhm_rad", k + 1), p.fwhm);
        s.num(format!("configured_peak{}_height", k + 1), p.height);
    }
    peaks_summary(&mut s, &run.fit);
    s.int("total_counts", total_counts(&table));
    Ok(Outcome {
        summary: s,
        tables: vec![
            counts_file(&table)?,
            ("peaks.csv".into(), peaks_table(&run.fit)?),
        ],
    })
}

fn flipper_summary(s: &mut Summary, counts: [f64; 4], estimates: &[Estimate; 3]) {
    for (name, n) in ["n00", "n10", "n01", "n11"].iter().zip(counts) {
        s.num(*name, n);
    }
    for (name, e) in ["polarization", "flipper1_efficiency", "flipper2_efficiency"]
        .iter()
        .zip(estimates)
    {
        s.num(*name, e.value);
        s.num(format!("{name}_sigma"), e.sigma);
    }
}

pub fn two_flipper(config: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let run = run_two_flipper_analysis(&config.two_flipper()?, RngSeed(seed))?;
    let table = CountsTable::from_scan(ScanKind::TwoFlipper, &run.records);
    let counts = [0, 1, 2, 3].map(|k| run.records[k].record.counts());
    let mut s = Summary::default();
    s.text("analysis", "two_flipper");
    s.num("analyzer_efficiency", config.noise.analyzer_efficiency);
    flipper_summary(
        &mut s,
        counts,
        &[run.polarization, run.efficiency_1, run.efficiency_2],
    );
    Ok(Outcome {
        summary: s,
        tables: vec![counts_file(&table)?],
    })
}

fn larmor_summary(s: &mut Summary, fit: &SinusoidFit) {
    let (amps, sigma) = fit.quarter_period();
    s.num("amps_per_half_pi", amps);
    s.num("amps_per_half_pi_sigma", sigma);
    s.num("frequency_rad_per_a", fit.frequency);
    s.num("frequency_sigma_rad_per_a", fit.frequency_sigma());
    s.num("offset", fit.offset);
    s.num("amplitude", fit.amplitude);
    s.num("phase_rad", fit.phase);
    s.num("chi_square", fit.chi_square);
    s.int("dof", fit.dof as u64);
}

pub fn larmor(config: &ExperimentConfig, seed: u64) -> Result<Outcome, CliError> {
    let cfg = config.larmor()?;
    let run = run_larmor_calibration(&cfg, RngSeed(seed))?;
    let table = CountsTable::from_scan(ScanKind::LarmorCalibration, &run.records);
    let mut s = Summary::default();
    s.text("analysis", "larmor_calibration");
    s.text("path", format!("{:?}", cfg.path));
    s.num("transmission", run.transmission);
    s.num("coil_effective_length_m", cfg.coil.effective_length);
    larmor_summary(&mut s, &run.fit);
    Ok(Outcome {
        summary: s,
        tables: vec![counts_file(&table)?],
    })
}

fn column(table: &CountsTable, name: &str) -> Result<Vec<f64>, CliError> {
    let i = table
        .column(name)
        .ok_or_else(|| invalid(format!("counts table has no `{name}` column")))?;
    Ok(table.rows.iter().map(|r| r.extras[i]).collect())
}

fn counts_of(table: &CountsTable) -> Vec<f64> {
    table.rows.iter().map(|r| r.record.counts()).collect()
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d) < 1e-9
}

/// Fits every fringe of a table; adds CHSH results when the four spin angles
/// of a Bell run are present, a phase drift for temperature scans and a
/// contrast map for raster scans.
fn fit_fringes(table: &CountsTable) -> Result<Outcome, CliError> {
    let groups = fringe_groups(table);
    let fits: Vec<FringeFit> = groups
        .iter()
        .map(|g| fit_fringe(&g.records))
        .collect::<ifmsim_core::Result<_>>()?;
    let mut s = Summary::default();
    let mut tables = vec![
        counts_file(table)?,
        (
            "fits.csv".into(),
            fringe_table(&table.extra_columns, &groups, &fits)?,
        ),
    ];
    let extras: Vec<&str> = table.extra_columns.iter().map(String::as_str).collect();
    match extras[..] {
        [] => {
            let bell_fringes: Option<Vec<(f64, FringeFit)>> = (groups.len() == 4
                && groups.iter().all(|g| g.detector == Detector::O))
            .then(|| {
                BELL_ALPHAS
                    .iter()
                    .map(|&a| {
                        groups
                            .iter()
                            .zip(&fits)
                            .find(|(g, _)| same_angle(g.alpha, a))
                            .map(|(g, f)| (g.alpha, *f))
                    })
                    .collect()
            })
            .flatten();
            match bell_fringes {
                Some(fringes) => {
                    let records: Vec<ScanRecord> = table
                        .rows
                        .iter()
                        .map(|r| ScanRecord {
                            coordinates: vec![r.record.setting.alpha, r.record.setting.chi],
                            record: r.record,
                        })
                        .collect();
                    s.text("analysis", "bell");
                    bell_summary(
                        &mut s,
                        &analyze_bell_records(&records)?,
                        &analyze_bell_fringes(&fringes)?,
                    );
                }
                None => {
                    s.text("analysis", "fringes");
                    s.int("n_fringes", groups.len() as u64);
                }
            }
        }
        ["temperature_c"] => {
            let pairs: Vec<(f64, FringeFit)> = groups
                .iter()
                .map(|g| g.extras[0])
                .zip(fits.iter().copied())
                .collect();
            let (unwrapped, drift) = phase_drift(&pairs)?;
            s.text("analysis", "temperature");
            temperature_summary(&mut s, &pairs, drift.as_ref());
            tables.push((
                "temperature.csv".into(),
                temperature_table(&pairs, &unwrapped)?,
            ));
        }
        ["x_mm", "z_mm"] => {
            let (map, grid_fits) = raster_map(&groups, &fits)?;
            s.text("analysis", "raster");
            raster_summary(&mut s, &map);
            tables.push((
                "contrast_map.csv".into(),
                contrast_map_table(&map, &grid_fits)?,
            ));
        }
        _ => {
            s.text("analysis", "fringes");
            s.int("n_fringes", groups.len() as u64);
        }
    }
    s.int("total_counts", total_counts(table));
    Ok(Outcome { summary: s, tables })
}

/// Arranges per-position fits on the x–z grid they cover.
fn raster_map(
    groups: &[FringeGroup],
    fits: &[FringeFit],
) -> Result<(RasterMap, Vec<Vec<FringeFit>>), CliError> {
    let mut xs: Vec<f64> = Vec::new();
    let mut zs: Vec<f64> = Vec::new();
    for g in groups {
        if !xs.contains(&g.extras[0]) {
            xs.push(g.extras[0]);
        }
        if !zs.contains(&g.extras[1]) {
            zs.push(g.extras[1]);
        }
    }
    let mut cells: Vec<Vec<Option<FringeFit>>> = vec![vec![None; xs.len()]; zs.len()];
    for (g, f) in groups.iter().zip(fits) {
        let ix = xs
            .iter()
            .position(|&x| x == g.extras[0])
            .expect("x collected above");
        let iz = zs
            .iter()
            .position(|&z| z == g.extras[1])
            .expect("z collected above");
        if g.detector != Detector::O || cells[iz][ix].replace(*f).is_some() {
            return Err(invalid(
                "raster table has more than one O-detector fringe per position",
            ));
        }
    }
    let grid_fits: Vec<Vec<FringeFit>> = cells
        .into_iter()
        .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()
        .ok_or_else(|| invalid("raster table does not cover a full x-z grid"))?;
    let contrast_grid = grid_fits
        .iter()
        .map(|row| row.iter().map(|f| f.contrast.clamp(0.0, 1.0)).collect())
        .collect();
    Ok((
        RasterMap {
            x_positions: xs,
            z_positions: zs,
            contrast_grid,
        },
        grid_fits,
    ))
}

/// Reanalyzes a counts table. The analysis follows from its coordinate
/// columns: `current_a` gives a Larmor calibration, `angle_rad` a rocking
/// curve with `peaks` Gaussians, `flipper1`/`flipper2` the two-flipper
/// inversion, anything else one fringe fit per spin angle and position.
pub fn fit(
    config: &ExperimentConfig,
    table: &CountsTable,
    peaks: Option<usize>,
) -> Result<Outcome, CliError> {
    let has = |name: &str| table.column(name).is_some();
    if has("current_a") {
        let fit = fit_sinusoid(&column(table, "current_a")?, &counts_of(table))?;
        let mut s = Summary::default();
        s.text("analysis", "larmor_calibration");
        larmor_summary(&mut s, &fit);
        return Ok(Outcome {
            summary: s,
            tables: vec![counts_file(table)?],
        });
    }
    if has("angle_rad") {
        let n = peaks.unwrap_or(if config.scan.rocking.double_peak {
            2
        } else {
            1
        });
        let fit = fit_gaussian_peaks(&column(table, "angle_rad")?, &counts_of(table), n)?;
        let mut s = Summary::default();
        s.text("analysis", "rocking");
        peaks_summary(&mut s, &fit);
        s.int("total_counts", total_counts(table));
        return Ok(Outcome {
            summary: s,
            tables: vec![
                counts_file(table)?,
                ("peaks.csv".into(), peaks_table(&fit)?),
            ],
        });
    }
    if has("flipper1") || has("flipper2") {
        let (f1, f2) = (column(table, "flipper1")?, column(table, "flipper2")?);
        let count_at = |a: f64, b: f64| -> Result<f64, CliError> {
            let mut hits = table
                .rows
                .iter()
                .zip(f1.iter().zip(&f2))
                .filter(|(_, (&x, &y))| x == a && y == b);
            match (hits.next(), hits.next()) {
                (Some((row, _)), None) => Ok(row.record.counts()),
                _ => Err(invalid(format!(
                    "expected exactly one row with flipper1 = {a}, flipper2 = {b}"
                ))),
            }
        };
        let counts = [
            count_at(0.0, 0.0)?,
            count_at(1.0, 0.0)?,
            count_at(0.0, 1.0)?,
            count_at(1.0, 1.0)?,
        ];
        let estimates = estimate_flipper_parameters(counts, config.noise.analyzer_efficiency)?;
        let mut s = Summary::default();
        s.text("analysis", "two_flipper");
        s.num("analyzer_efficiency", config.noise.analyzer_efficiency);
        flipper_summary(&mut s, counts, &estimates);
        return Ok(Outcome {
            summary: s,
            tables: vec![counts_file(table)?],
        });
    }
    fit_fringes(table)
}
