//! Per-site observable maps and the tidy trajectory CSV shared by the exact
//! and tensor-network evolvers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Cell, LatticeSpec};
use crate::symmetry::Symmetry;

/// Real-valued observable laid out on the lattice grid, row-major with row 0
/// at the bottom edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableMap {
    pub label: String,
    /// Time in seconds.
    pub time: f64,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ObservableMap {
    pub fn new(label: impl Into<String>, time: f64, rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * cols, "map size mismatch");
        Self { label: label.into(), time, rows, cols, values }
    }

    /// Scatters per-site values (snake order) onto the grid.
    pub fn from_sites(lattice: &LatticeSpec, label: impl Into<String>, time: f64, site_values: &[f64]) -> Self {
        let (rows, cols) = (lattice.ly(), lattice.lx());
        let mut values = vec![0.0; rows * cols];
        for (k, &v) in site_values.iter().enumerate() {
            let c = lattice.cell(k);
            values[c.row * cols + c.col] = v;
        }
        Self::new(label, time, rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-site values in snake order.
    pub fn site_values(&self, lattice: &LatticeSpec) -> Vec<f64> {
        lattice.cells().iter().map(|c| self.get(c.row, c.col)).collect()
    }

    /// The map transported by `g`: the value at `c` moves to `g(c)`.
    pub fn transformed(&self, g: Symmetry) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for row in 0..self.rows {
            for col in 0..self.cols {
                let image = g.apply(Cell { row, col }, self.rows, self.cols);
                values[image.row * self.cols + image.col] = self.get(row, col);
            }
        }
        Self { values, ..self.clone() }
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One recorded time of an evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    /// Rydberg occupation map.
    pub occupation: ObservableMap,
    /// Expectation value of H (rad/s).
    pub energy: f64,
}

/// Writes `time_ns, site_row, site_col, n_expect, energy` rows, one per site
/// and snapshot.
pub fn write_trajectory_csv<W: Write>(out: W, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_ns", "site_row", "site_col", "n_expect", "energy"])?;
    for s in snapshots {
        let time_ns = format!("{:.6}", s.time * 1e9);
        let energy = format!("{:.12e}", s.energy);
        let map = &s.occupation;
        for row in 0..map.rows() {
            for col in 0..map.cols() {
                w.write_record([
                    time_ns.as_str(),
                    &row.to_string(),
                    &col.to_string(),
                    &format!("{:.12e}", map.get(row, col)),
                    energy.as_str(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
