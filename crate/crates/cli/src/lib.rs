//! Batch front end of the interferometer simulator: reads a TOML
//! configuration, runs one procedure and writes its counts table, summary
//! and run manifest.

pub mod commands;
pub mod config;
mod error;
pub mod report;
pub mod table;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use ifmsim_core::procedures::ScanKind;

pub use crate::config::{load_config, parse_config, ConfigError, ExperimentConfig};
pub use crate::error::CliError;
use crate::report::{json_text, write_files};
use crate::table::CountsTable;

/// Output directory used when neither `--out`, `IFMSIM_OUT` nor
/// `output_dir` is given.
pub const DEFAULT_OUTPUT_DIR: &str = "ifmsim-out";

/// Exit status of a usage error (bad flags or subcommand).
pub const EXIT_USAGE: i32 = 1;
/// Exit status of a runtime error, including an invalid configuration.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ifmsim",
    version,
    about = "Polarized neutron interferometer simulator"
)]
pub struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Root seed; overrides `seed` in the configuration.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Output directory; overrides `IFMSIM_OUT` and `output_dir`.
    #[arg(long, global = true, value_name = "DIR", env = "IFMSIM_OUT")]
    pub out: Option<PathBuf>,

    /// Do not print the summary.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// CHSH measurement: χ scans at four spin analysis angles.
    Bell,
    /// Contrast map over beam positions.
    Raster,
    /// Fringe contrast and phase versus cooling-water temperature.
    Temperature,
    /// Rocking curve of the monochromator crystal.
    Rocking,
    /// Beam polarization and flipper efficiencies from four flipper states.
    TwoFlipper,
    /// Coil current for a π/2 spin rotation with one path blocked.
    LarmorCal,
    /// Reanalyze an existing counts table.
    Fit {
        /// Counts table written by a previous run.
        #[arg(long, value_name = "PATH")]
        counts: PathBuf,
        /// Number of Gaussian peaks for rocking curves.
        #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..=8))]
        peaks: Option<u64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bell => "bell",
            Command::Raster => "raster",
            Command::Temperature => "temperature",
            Command::Rocking => "rocking",
            Command::TwoFlipper => "two-flipper",
            Command::LarmorCal => "larmor-cal",
            Command::Fit { .. } => "fit",
        }
    }

    fn scan_kind(&self) -> Option<ScanKind> {
        match self {
            Command::Bell => Some(ScanKind::Bell),
            Command::Raster => Some(ScanKind::Raster),
            Command::Temperature => Some(ScanKind::Temperature),
            Command::Rocking => Some(ScanKind::Rocking),
            Command::TwoFlipper => Some(ScanKind::TwoFlipper),
            Command::LarmorCal => Some(ScanKind::LarmorCalibration),
            Command::Fit { .. } => None,
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            // nothing sensible is left to do if the terminal is gone
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Runs a parsed command line and writes its artifacts.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let seed = config.seed;

    let outcome = match &cli.command {
        Command::Bell => commands::bell(&config, seed)?,
        Command::Raster => commands::raster(&config, seed)?,
        Command::Temperature => commands::temperature(&config, seed)?,
        Command::Rocking => commands::rocking(&config, seed)?,
        Command::TwoFlipper => commands::two_flipper(&config, seed)?,
        Command::LarmorCal => commands::larmor(&config, seed)?,
        Command::Fit { counts, peaks } => {
            let table = CountsTable::read(counts)?;
            commands::fit(&config, &table, peaks.map(|n| n as usize))?
        }
    };

    let echo = config.echo();
    let mut files = outcome.tables.clone();
    files.push(("summary.txt".into(), outcome.summary.to_text()));
    files.push((
        "summary.json".into(),
        json_text(&outcome.summary.to_json())?,
    ));
    files.push((
        "config.toml".into(),
        toml::to_string(&echo).map_err(|e| CliError::Output(e.to_string()))?,
    ));
    let mut manifest = json!({
        "tool": "ifmsim",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "seed": seed,
    });
    if let Some(kind) = cli.command.scan_kind() {
        manifest["seed_stream"] = json!(kind.stream());
    }
    if let Command::Fit { counts, peaks } = &cli.command {
        manifest["input"] = json!({ "counts": counts.display().to_string(), "peaks": peaks });
    }
    manifest["outputs"] = json!(files
        .iter()
        .map(|(name, _)| name.as_str())
        .collect::<Vec<_>>());
    manifest["config"] =
        serde_json::to_value(&echo).map_err(|e| CliError::Output(e.to_string()))?;
    files.push(("manifest.json".into(), json_text(&manifest)?));

    write_files(&out, &files)?;
    if !cli.quiet {
        print!("{}", outcome.summary.to_text());
        eprintln!("wrote {} files to {}", files.len(), out.display());
    }
    Ok(())
}
