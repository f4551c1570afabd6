//! Artifact writers. CSV files carry a header row and use Rust's
//! locale-independent float formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::descent::{IterationRecord, NeedleCurveSample};
use crate::error::{Error, Result};
use crate::problem::{ControlField, TensorGrid};

/// Magic bytes opening a binary density file.
pub const DENSITY_MAGIC: &[u8; 8] = b"FPKDENS1";

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_cost_history(path: &Path, history: &[IterationRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "total", "terminal", "running", "penalty", "residual", "wall_time"])
        .map_err(csv_error)?;
    for r in history {
        w.write_record([
            r.index.to_string(),
            num(r.cost.total),
            num(r.cost.terminal_part),
            num(r.cost.running_part),
            num(r.cost.penalty_part),
            r.residual.map_or(String::new(), num),
            num(r.wall_time),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format slab: one row per (η, x) node, density clamped at zero.
pub fn write_density_csv(path: &Path, grid: &TensorGrid, slab: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "eta", "eta_weight", "density"]).map_err(csv_error)?;
    let n_x = grid.n_x();
    for (e, (&eta, &weight)) in grid.eta_nodes().iter().zip(grid.eta_weights()).enumerate() {
        for i in 0..n_x {
            w.write_record([num(grid.x(i)), num(eta), num(weight), num(slab[e * n_x + i].max(0.0))])
                .map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `FPKDENS1`, then `n_x` and `n_eta` as u64 LE, then the clamped slab as
/// f64 LE, η-major.
pub fn write_density_bin(path: &Path, grid: &TensorGrid, slab: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DENSITY_MAGIC)?;
    w.write_all(&(grid.n_x() as u64).to_le_bytes())?;
    w.write_all(&(grid.n_eta() as u64).to_le_bytes())?;
    for v in slab {
        w.write_all(&v.max(0.0).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_density_bin`]: `(n_x, n_eta, values)`.
pub fn read_density_bin(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path)?;
    let bad = || Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "not a density file"));
    if bytes.len() < 24 || &bytes[..8] != DENSITY_MAGIC {
        return Err(bad());
    }
    let word = |k: usize| u64::from_le_bytes(bytes[k..k + 8].try_into().unwrap()) as usize;
    let (n_x, n_eta) = (word(8), word(16));
    let body = &bytes[24..];
    if n_x.checked_mul(n_eta).and_then(|n| n.checked_mul(8)) != Some(body.len()) {
        return Err(bad());
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((n_x, n_eta, values))
}

/// Markovian: `t, x, u` per node; open-loop: `t, u`. Every `stride`-th time
/// node is written.
pub fn write_control(path: &Path, grid: &TensorGrid, control: &ControlField, stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    let n_x = grid.n_x();
    match control {
        ControlField::Markovian { .. } => {
            w.write_record(["t", "x", "u"]).map_err(csv_error)?;
            for j in (0..grid.n_t()).step_by(stride.max(1)) {
                for i in 0..n_x {
                    w.write_record([num(grid.t(j)), num(grid.x(i)), num(control.at(j, i))])
                        .map_err(csv_error)?;
                }
            }
        }
        ControlField::OpenLoop { .. } => {
            w.write_record(["t", "u"]).map_err(csv_error)?;
            for j in (0..grid.n_t()).step_by(stride.max(1)) {
                w.write_record([num(grid.t(j)), num(control.at(j, 0))]).map_err(csv_error)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_needle_curve(path: &Path, samples: &[NeedleCurveSample]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["s", "mean", "std_error"]).map_err(csv_error)?;
    for s in samples {
        w.write_record([num(s.s), num(s.expected_terminal_cost), num(s.std_error)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of `mc_report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct McRow {
    pub functional: &'static str,
    pub control: &'static str,
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub pde_value: f64,
}

pub fn write_mc_report(path: &Path, rows: &[McRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["functional", "control", "estimate", "std_error", "n_paths", "pde_value"])
        .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.functional.to_string(),
            r.control.to_string(),
            num(r.estimate),
            num(r.std_error),
            r.n_paths.to_string(),
            num(r.pde_value),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row of `verify_report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured_error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, measured_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured_error,
            tolerance,
        }
    }

    pub fn pass(&self) -> bool {
        self.measured_error <= self.tolerance
    }
}

pub fn write_verify_report(path: &Path, checks: &[Check]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["check", "measured_error", "tolerance", "pass"]).map_err(csv_error)?;
    for c in checks {
        w.write_record([c.name.clone(), num(c.measured_error), num(c.tolerance), c.pass().to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// File label for a snapshot time, e.g. `0.5` or `6`.
pub fn time_label(t: f64) -> String {
    format!("{t}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_density_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TensorGrid::with_uniform_eta(8, 3, 1.0, 2, -1.0, 1.0).unwrap();
        let slab: Vec<f64> = (0..16).map(|k| k as f64 * 0.25 - 1.0).collect();
        let path = dir.path().join("d.bin");
        write_density_bin(&path, &grid, &slab).unwrap();
        let (n_x, n_eta, values) = read_density_bin(&path).unwrap();
        assert_eq!((n_x, n_eta), (8, 2));
        for (v, s) in values.iter().zip(&slab) {
            assert_eq!(*v, s.max(0.0));
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 24 + 16 * 8);
    }

    #[test]
    fn cost_history_leaves_first_residual_empty() {
        use crate::problem::CostReport;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rows = [
            IterationRecord { index: 0, cost: CostReport::new(1.0, 0.0, 0.5), residual: None, wall_time: 0.0, held_steps: 0 },
            IterationRecord { index: 1, cost: CostReport::new(0.5, 0.0, 0.25), residual: Some(0.75), wall_time: 1.5, held_steps: 0 },
        ];
        write_cost_history(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,total,terminal,running,penalty,residual,wall_time");
        assert_eq!(lines[1], "0,1.5,1,0,0.5,,0");
        assert_eq!(lines[2], "1,0.75,0.5,0,0.25,0.75,1.5");
    }

    #[test]
    fn labels() {
        assert_eq!(time_label(0.0), "0");
        assert_eq!(time_label(0.5), "0.5");
        assert_eq!(time_label(6.0), "6");
    }
}
