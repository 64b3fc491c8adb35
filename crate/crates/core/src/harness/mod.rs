//! Experiment drivers behind the command-line tool.

pub mod accuracy;
pub mod bench;
pub mod calibrate;
pub mod chart;
pub mod complexity;
pub mod run;
pub mod sweep;

use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Version of the CSV and JSON artifact layouts. Bumped whenever a column or
/// field changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Serialise `rows` to a CSV file with a header row.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
