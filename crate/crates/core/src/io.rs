//! CSV and JSON output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::semiclassical::PhasePath;
use crate::unravel::{BinnedSignal, TrajectoryRecord};

/// One CSV row per serialized record, header from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Equal-length columns under the given headers.
pub fn write_columns(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if headers.len() != columns.len() {
        return Err(Error::DimensionMismatch {
            expected: headers.len(),
            got: columns.len(),
        });
    }
    let len = columns.first().map_or(0, |c| c.len());
    if let Some(bad) = columns.iter().find(|c| c.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: bad.len(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    let mut buf = vec![String::new(); columns.len()];
    for i in 0..len {
        for (cell, col) in buf.iter_mut().zip(columns) {
            cell.clear();
            cell.push_str(&col[i].to_string());
        }
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, m_x, m_y, m_z` on the output grid, plus `x_tilde` for Doob records.
pub fn write_trajectory(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let (x, y, z) = (rec.series(0), rec.series(1), rec.series(2));
    if rec.tilted_quadrature.is_empty() {
        write_columns(path, &["t", "m_x", "m_y", "m_z"], &[&rec.times, &x, &y, &z])
    } else {
        write_columns(
            path,
            &["t", "m_x", "m_y", "m_z", "x_tilde"],
            &[&rec.times, &x, &y, &z, &rec.tilted_quadrature],
        )
    }
}

/// Per-step homodyne current `I_x_raw`, stamped with the end of each step.
pub fn write_current(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let dt = rec.params.dt;
    let t: Vec<f64> = (1..=rec.raw_current.len()).map(|k| k as f64 * dt).collect();
    write_columns(path, &["t", "I_x_raw"], &[&t, &rec.raw_current])
}

pub fn write_jump_times(path: &Path, times: &[f64]) -> Result<()> {
    write_columns(path, &["t"], &[times])
}

pub fn write_binned(path: &Path, signal: &BinnedSignal) -> Result<()> {
    write_columns(path, &["t", "value"], &[&signal.centers, &signal.values])
}

/// `t, phi, m_y, m_z`.
pub fn write_phase_path(path: &Path, p: &PhasePath) -> Result<()> {
    let (y, z): (Vec<f64>, Vec<f64>) = p.phi.iter().map(|f| f.sin_cos()).unzip();
    write_columns(path, &["t", "phi", "m_y", "m_z"], &[&p.times, &p.phi, &y, &z])
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One named numeric column of a CSV file.
pub fn read_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let idx = r
        .headers()?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::InvalidInput(format!("no column '{name}' in {}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: f64 = rec[idx]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("non-numeric value '{}' in column '{name}'", &rec[idx])))?;
        out.push(v);
    }
    Ok(out)
}
