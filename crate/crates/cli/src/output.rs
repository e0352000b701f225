//! CSV rows and all-or-nothing file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// One solve. Column order is the documented CSV schema.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveRow {
    pub cells: usize,
    pub h: f64,
    pub k: usize,
    pub eps: f64,
    pub dofs: usize,
    pub energy_err: Option<f64>,
    pub l2_err: Option<f64>,
    pub cond: Option<f64>,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub eps: f64,
    pub cells: usize,
    pub h: f64,
    pub dofs: usize,
    pub energy_rate_h: Option<f64>,
    pub l2_rate_h: Option<f64>,
    pub energy_rate_sqrt_dofs: Option<f64>,
    pub l2_rate_sqrt_dofs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerRow {
    pub cells: usize,
    pub h: f64,
    pub k: usize,
    pub eps: f64,
    pub theta: f64,
    pub max_hessian: f64,
    pub flagged_cells: usize,
    pub flagged_area: f64,
    pub boundary_adjacent: bool,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCellRow {
    pub mesh: usize,
    pub eps: f64,
    pub cell: usize,
    pub x: f64,
    pub y: f64,
    pub area: f64,
    pub hessian: f64,
    pub flagged: bool,
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV serialization");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

/// Header-only CSV for an empty table.
pub fn csv_header(columns: &[&str]) -> String {
    format!("{}\n", columns.join(","))
}

/// Writes `text` to a temporary file beside `path`, then renames it into
/// place, so `path` never holds partial output.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Output { path: path.display().to_string(), err: e };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(err)?;
    tmp.write_all(text.as_bytes()).map_err(err)?;
    tmp.flush().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// `dir/stem<suffix>` next to the main output file.
pub fn companion(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cond_column() {
        let row = SolveRow {
            cells: 4,
            h: 0.5,
            k: 1,
            eps: 0.0,
            dofs: 24,
            energy_err: Some(0.25),
            l2_err: Some(0.125),
            cond: None,
            runtime_ms: 1.5,
        };
        let text = to_csv(&[row]);
        assert_eq!(text, "cells,h,k,eps,dofs,energy_err,l2_err,cond,runtime_ms\n4,0.5,1,0.0,24,0.25,0.125,,1.5\n");
    }

    #[test]
    fn companion_names() {
        assert_eq!(companion(Path::new("/a/b/run.csv"), "_rates.csv"), PathBuf::from("/a/b/run_rates.csv"));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, "a\n").unwrap();
        write_atomic(&p, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
