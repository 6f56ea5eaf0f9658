//! CSV ingestion and the machine-readable output files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use spectral_mcd::DataMatrix;

use crate::CliError;

/// Parse a numeric CSV into a data matrix. Errors carry 1-based line and
/// column numbers.
pub fn read_csv(path: &Path, has_header: bool) -> Result<DataMatrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {}", path.display(), e)))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        if has_header && lineno == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::data(format!(
                    "{}: line {}, column {}: '{}' is not a number",
                    path.display(),
                    lineno + 1,
                    col + 1,
                    cell.trim()
                ))
            })?;
            row.push(v);
        }
        if let Some(w) = width {
            if row.len() != w {
                return Err(CliError::data(format!(
                    "{}: line {} has {} columns, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    w
                )));
            }
        } else {
            width = Some(row.len());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    DataMatrix::from_rows(&rows).map_err(CliError::from)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::data(format!("cannot create {}: {}", dir.display(), e)))?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CliError::data(format!("cannot write {}: {}", path.display(), e)))
}

/// Matrix as CSV, shortest round-trip decimals, no header.
pub fn matrix_csv(x: &DataMatrix) -> String {
    let mut out = String::new();
    for i in 0..x.n() {
        for j in 0..x.p() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", x.values()[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn labels_csv(labels: &[u8], depths: &[f64]) -> String {
    let mut out = String::from("row_index,label,depth\n");
    for (i, (&l, &d)) in labels.iter().zip(depths).enumerate() {
        let _ = writeln!(out, "{},{},{}", i, l, d);
    }
    out
}

pub fn truth_csv(labels: &[u8]) -> String {
    let mut out = String::from("label\n");
    for &l in labels {
        let _ = writeln!(out, "{}", l);
    }
    out
}
