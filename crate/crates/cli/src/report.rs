//! Result summaries and the files a run leaves on disk.

use std::path::Path;

use serde_json::{Map, Value};

use crate::error::CliError;

/// Ordered key/value results of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, Value)>,
}

impl Summary {
    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        // JSON has no NaN or infinity; such values are written as null
        self.entries.push((key.into(), Value::from(value)));
    }

    pub fn int(&mut self, key: impl Into<String>, value: u64) {
        self.entries.push((key.into(), Value::from(value)));
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), Value::from(value.into())));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// `key = value` lines; reals use the shortest representation that
    /// reads back to the same number.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let shown = match v {
                Value::String(s) => s.clone(),
                Value::Null => "NaN".into(),
                Value::Number(n) => match (n.as_u64(), n.as_f64()) {
                    (Some(i), _) => i.to_string(),
                    (None, Some(x)) => format!("{x:?}"),
                    _ => n.to_string(),
                },
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {shown}\n"));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.entries.iter().cloned().collect::<Map<_, _>>())
    }
}

/// Real number in a result table.
pub fn real(x: f64) -> String {
    format!("{x:?}")
}

/// CSV text of a header and rows.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn json_text(value: &Value) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Output(e.to_string()))
}

/// Writes `files` into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|source| CliError::Io { path, source })?;
    }
    Ok(())
}
