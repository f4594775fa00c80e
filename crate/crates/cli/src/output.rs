use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// One line of plot data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub x: f64,
    pub y: f64,
    /// Empty in the CSV when the point has no error bar.
    pub y_err: Option<f64>,
    pub series: String,
}

impl PlotRow {
    pub fn new(series: impl Into<String>, x: f64, y: f64, y_err: Option<f64>) -> Self {
        Self {
            x,
            y,
            y_err,
            series: series.into(),
        }
    }
}

/// CSV text with header `x,y,y_err,series` and `\n` line endings.
pub fn csv_string(rows: &[PlotRow]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(["x", "y", "y_err", "series"]).map_err(io_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Writes `contents` through a temporary file in the same directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.write_all(contents).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.as_file().sync_all().map_err(|e| CliError::Io(e.to_string()))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
