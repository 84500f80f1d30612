//! CSV and JSON artifacts.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use lensloc_core::scenario::{Scenario, VehiclePose};
use serde::{Deserialize, Serialize};

use crate::experiments::{BenchRow, CrlbRow, LocalizedScene, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.display().to_string(), source }
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_table(path: &Path, table: &ResultTable) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<&str> = table.coord_names.iter().map(String::as_str).collect();
    header.extend(["metric", "value", "trials", "std_err"]);
    w.write_record(&header).map_err(csv_err(path))?;
    for row in &table.rows {
        let mut rec = row.coords.clone();
        rec.push(row.metric.clone());
        rec.push(num(row.value));
        rec.push(row.trials.to_string());
        rec.push(row.std_err.map(num).unwrap_or_default());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_crlb(path: &Path, rows: &[CrlbRow]) -> Result<(), IoError> {
    write_rows(path, rows)
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<(), IoError> {
    write_rows(path, rows)
}

/// One row per vehicle per solved scene; estimate columns are empty when
/// the solve failed.
pub fn write_poses(path: &Path, scenes: &[LocalizedScene]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["snr_db", "trial", "vehicle", "x", "y", "omega", "x_hat", "y_hat", "omega_hat"])
        .map_err(csv_err(path))?;
    for s in scenes {
        for (k, t) in s.truth.iter().enumerate() {
            let est = s.estimate.as_ref().map(|e| e[k]);
            let hat = |f: fn(&lensloc_core::localization::Pose) -> f64| est.as_ref().map(|p| num(f(p))).unwrap_or_default();
            w.write_record([
                num(s.snr_db),
                s.trial.to_string(),
                k.to_string(),
                num(t.x),
                num(t.y),
                num(t.omega),
                hat(|p| p.x),
                hat(|p| p.y),
                hat(|p| p.omega),
            ])
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ScenarioRecord {
    id: usize,
    x: f64,
    y: f64,
    omega: f64,
}

/// Writes vehicle poses as `id,x,y,omega`.
pub fn write_scenario(path: &Path, scene: &Scenario) -> Result<(), IoError> {
    let rows: Vec<ScenarioRecord> = scene
        .vehicles
        .iter()
        .enumerate()
        .map(|(id, v)| ScenarioRecord { id, x: v.position.x, y: v.position.y, omega: v.heading })
        .collect();
    write_rows(path, &rows)
}

/// Reads `id,x,y,omega` rows (ids `0..n` in any order) and links every
/// pair within `comm_radius`.
pub fn read_scenario(path: &Path, comm_radius: f64) -> Result<Scenario, IoError> {
    let fmt = |message: String| IoError::Format { path: path.display().to_string(), message };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows: Vec<ScenarioRecord> = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.map_err(csv_err(path))?);
    }
    rows.sort_by_key(|r| r.id);
    for (i, row) in rows.iter().enumerate() {
        if row.id != i {
            return Err(fmt(format!("vehicle ids must be 0..{} without gaps", rows.len())));
        }
        if !(row.x.is_finite() && row.y.is_finite() && row.omega.is_finite()) {
            return Err(fmt(format!("vehicle {i} has a non-finite pose")));
        }
    }
    let vehicles = rows
        .iter()
        .map(|r| VehiclePose::new(r.x, r.y, lensloc_core::math::wrap_positive(r.omega)))
        .collect();
    Scenario::from_vehicles(vehicles, comm_radius).map_err(|e| fmt(e.to_string()))
}

/// Pretty-printed JSON of `value`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| IoError::Format { path: path.display().to_string(), message: e.to_string() })?;
    f.write_all(b"\n").map_err(io_err(path))
}
