//! Counts tables: comma-separated text with a header row. The first five
//! columns are `detector, alpha_rad, chi_rad, time_s, counts`; scan
//! coordinates other than the two angles follow under their own names.
//! Every real number is written with 12 significant digits.

use std::path::Path;

use ifmsim_core::counting::{format_sig12, CountRecord, Detector};
use ifmsim_core::procedures::{ScanKind, ScanRecord};
use ifmsim_core::qcore::JointSetting;

use crate::error::CliError;

pub const BASE_COLUMNS: [&str; 5] = ["detector", "alpha_rad", "chi_rad", "time_s", "counts"];

/// One row of a counts table.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsRow {
    pub record: CountRecord,
    /// Values of [`CountsTable::extra_columns`], in the same order.
    pub extras: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    pub extra_columns: Vec<String>,
    pub rows: Vec<CountsRow>,
}

impl CountsTable {
    /// Table of a simulated scan, rows in grid order.
    pub fn from_scan(kind: ScanKind, records: &[ScanRecord]) -> Self {
        let names = kind.coordinates();
        let extra: Vec<usize> = (0..names.len())
            .filter(|&i| names[i] != "alpha_rad" && names[i] != "chi_rad")
            .collect();
        Self {
            extra_columns: extra.iter().map(|&i| names[i].to_string()).collect(),
            rows: records
                .iter()
                .map(|r| CountsRow {
                    record: r.record,
                    extras: extra.iter().map(|&i| r.coordinates[i]).collect(),
                })
                .collect(),
        }
    }

    /// Index of an extra column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.extra_columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = BASE_COLUMNS
            .iter()
            .copied()
            .chain(self.extra_columns.iter().map(String::as_str))
            .collect();
        w.write_record(&header)?;
        for row in &self.rows {
            let r = &row.record;
            let mut fields = vec![
                r.detector.as_str().to_string(),
                format_sig12(r.setting.alpha),
                format_sig12(r.setting.chi),
                format_sig12(r.integration_time),
                r.observed_counts.to_string(),
            ];
            fields.extend(row.extras.iter().map(|&v| format_sig12(v)));
            w.write_record(&fields)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }

    /// Parses a counts table; the mean rate of each record is set to the
    /// observed rate since the table does not carry the model.
    pub fn from_csv(text: &str, source: &str) -> Result<Self, CliError> {
        let bad = |line: u64, message: String| CliError::Table {
            file: source.to_string(),
            line,
            message,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        let position = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(1, format!("missing column `{name}`")))
        };
        let base = BASE_COLUMNS.map(position);
        let [detector, alpha, chi, time, counts] = base;
        let (detector, alpha, chi, time, counts) = (detector?, alpha?, chi?, time?, counts?);
        let base_idx = [detector, alpha, chi, time, counts];
        let extra_idx: Vec<usize> = (0..header.len())
            .filter(|i| !base_idx.contains(i))
            .collect();
        let extra_columns: Vec<String> = extra_idx.iter().map(|&i| header[i].to_string()).collect();
        for (k, name) in extra_columns.iter().enumerate() {
            if name.is_empty() || extra_columns[..k].contains(name) {
                return Err(bad(1, format!("column name `{name}` is empty or repeated")));
            }
        }

        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            let line = rec.position().map_or(k as u64 + 2, |p| p.line());
            let real = |i: usize| -> Result<f64, CliError> {
                let v: f64 = rec[i].parse().map_err(|_| {
                    bad(
                        line,
                        format!("`{}` is not a number in column `{}`", &rec[i], &header[i]),
                    )
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad(
                        line,
                        format!("non-finite value in column `{}`", &header[i]),
                    ))
                }
            };
            let det: Detector = rec[detector]
                .parse()
                .map_err(|e| bad(line, format!("{e}")))?;
            let t = real(time)?;
            if t <= 0.0 {
                return Err(bad(line, "time_s must be positive".into()));
            }
            let n: u64 = rec[counts].parse().map_err(|_| {
                bad(
                    line,
                    format!("`{}` is not a non-negative integer count", &rec[counts]),
                )
            })?;
            rows.push(CountsRow {
                record: CountRecord {
                    setting: JointSetting::new(real(alpha)?, real(chi)?),
                    integration_time: t,
                    mean_rate: n as f64 / t,
                    observed_counts: n,
                    detector: det,
                },
                extras: extra_idx
                    .iter()
                    .map(|&i| real(i))
                    .collect::<Result<_, _>>()?,
            });
        }
        if rows.is_empty() {
            return Err(bad(1, "the table has no data rows".into()));
        }
        Ok(Self {
            extra_columns,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_csv(&text, &path.display().to_string())
    }
}
