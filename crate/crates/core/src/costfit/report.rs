//! Extrapolated resource reports, crossover search and the summary table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CostModel, Method};
use crate::budget::JOULES_PER_KWH;
use crate::error::{Error, Result};
use crate::model::steps_for;
use crate::mps::memory_estimate;

/// Rated power of one GPU under load (W).
pub const DEFAULT_CLASSICAL_POWER_W: f64 = 400.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSettings {
    pub chi: usize,
    /// Pulse duration (s).
    pub t_pulse: f64,
    /// Integration step (s).
    pub dt: f64,
    pub power_watts: f64,
}

impl Default for ClassicalSettings {
    fn default() -> Self {
        Self { chi: 1000, t_pulse: 4e-6, dt: 1e-9, power_watts: DEFAULT_CLASSICAL_POWER_W }
    }
}

/// Projected cost of one classical simulation of a quench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub method: Method,
    pub n: usize,
    pub chi: usize,
    pub t_pulse: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub seconds_per_step: f64,
    pub total_seconds: f64,
    /// Full memory model (MPS only).
    pub memory_bytes: Option<f64>,
    /// Leading-order memory term (MPS only).
    pub memory_leading_bytes: Option<f64>,
    pub power_watts: f64,
    pub energy_kwh: f64,
    pub in_domain: bool,
    pub warnings: Vec<String>,
}

pub fn extrapolate(model: &CostModel, n: usize, chi: usize, t_pulse: f64, dt: f64, power_watts: f64) -> Result<ResourceReport> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    if !(t_pulse.is_finite() && t_pulse >= 0.0) {
        return Err(Error::param("t_pulse", format!("{t_pulse} must be non-negative")));
    }
    if !(power_watts.is_finite() && power_watts >= 0.0) {
        return Err(Error::param("power_watts", format!("{power_watts} must be non-negative")));
    }
    let n_steps = steps_for(t_pulse, dt);
    let seconds_per_step = model.predict(n, chi);
    let total_seconds = n_steps as f64 * seconds_per_step;
    let in_domain = model.in_domain(n, chi);
    let mut warnings = Vec::new();
    if !in_domain {
        let d = model.domain();
        warnings.push(match model.method() {
            Method::Mps => format!(
                "(N={n}, chi={chi}) lies outside the fitted domain N in [{}, {}], chi in [{}, {}]",
                d.n_min, d.n_max, d.chi_min, d.chi_max
            ),
            Method::Nqs => format!("N={n} lies outside the fitted domain N in [{}, {}]", d.n_min, d.n_max),
        });
    }
    let (memory_bytes, memory_leading_bytes) = match model.method() {
        Method::Mps => {
            let m = memory_estimate(n, chi, 2, 16, crate::mps::DEFAULT_K_MAX);
            (Some(m.total), Some(m.leading))
        }
        Method::Nqs => (None, None),
    };
    Ok(ResourceReport {
        method: model.method(),
        n,
        chi,
        t_pulse,
        dt,
        n_steps,
        seconds_per_step,
        total_seconds,
        memory_bytes,
        memory_leading_bytes,
        power_watts,
        energy_kwh: power_watts * total_seconds / JOULES_PER_KWH,
        in_domain,
        warnings,
    })
}

/// Largest bond dimension an `n`-site chain of qubits can use:
/// `min(chi, 2^floor(n/2))`.
pub fn effective_chi(n: usize, chi: usize) -> usize {
    let half = n / 2;
    if half >= usize::BITS as usize - 1 {
        chi
    } else {
        chi.min(1usize << half)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverPoint {
    pub n: usize,
    pub classical_seconds: f64,
    pub qpu_seconds: f64,
    pub classical_kwh: f64,
    pub qpu_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverResult {
    /// Interpolated size beyond which the QPU is faster; `None` if it never
    /// is on the grid.
    pub n_time: Option<f64>,
    pub n_energy: Option<f64>,
    pub points: Vec<CrossoverPoint>,
}

/// Locates the first grid point where `qpu < classical` and interpolates
/// the crossing from the previous point, linearly in the log-ratio when both
/// costs are positive (linearly in the difference otherwise).
fn first_crossing(grid: &[usize], classical: &[f64], qpu: &[f64]) -> Option<f64> {
    let k = (0..grid.len()).find(|&i| qpu[i] < classical[i])?;
    if k == 0 {
        return Some(grid[0] as f64);
    }
    let gap = |i: usize| {
        if qpu[i] > 0.0 && classical[i] > 0.0 && qpu[k - 1] > 0.0 && classical[k - 1] > 0.0 {
            (qpu[i] / classical[i]).ln()
        } else {
            qpu[i] - classical[i]
        }
    };
    let (g0, g1) = (gap(k - 1), gap(k));
    let (n0, n1) = (grid[k - 1] as f64, grid[k] as f64);
    if g0 == g1 {
        return Some(n1);
    }
    Some(n0 + (n1 - n0) * g0 / (g0 - g1))
}

/// Sweeps `grid` (increasing sizes) and reports where the QPU first beats the
/// classical method in wall time and in energy. Both cost functions return
/// `(seconds, kWh)` for a size.
pub fn crossover<C, Q>(grid: &[usize], classical: C, qpu: Q) -> Result<CrossoverResult>
where
    C: Fn(usize) -> Result<(f64, f64)>,
    Q: Fn(usize) -> Result<(f64, f64)>,
{
    if grid.is_empty() {
        return Err(Error::param("grid", "must not be empty"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &n in grid {
        let (cs, ce) = classical(n)?;
        let (qs, qe) = qpu(n)?;
        points.push(CrossoverPoint { n, classical_seconds: cs, qpu_seconds: qs, classical_kwh: ce, qpu_kwh: qe });
    }
    let col = |f: fn(&CrossoverPoint) -> f64| points.iter().map(f).collect::<Vec<f64>>();
    let n_time = first_crossing(grid, &col(|p| p.classical_seconds), &col(|p| p.qpu_seconds));
    let n_energy = first_crossing(grid, &col(|p| p.classical_kwh), &col(|p| p.qpu_kwh));
    Ok(CrossoverResult { n_time, n_energy, points })
}

/// Human-readable duration with the unit chosen by magnitude.
pub fn format_duration(seconds: f64) -> String {
    const MIN: f64 = 60.0;
    const HOUR: f64 = 3600.0;
    const DAY: f64 = 86400.0;
    const YEAR: f64 = 365.25 * DAY;
    if !seconds.is_finite() {
        "inf".into()
    } else if seconds < MIN {
        format!("{seconds:.1} s")
    } else if seconds < HOUR {
        format!("{:.1} min", seconds / MIN)
    } else if seconds < 72.0 * HOUR {
        format!("{:.1} h", seconds / HOUR)
    } else if seconds < YEAR {
        format!("{:.1} d", seconds / DAY)
    } else {
        format!("{:.3e} y", seconds / YEAR)
    }
}

fn format_bytes(bytes: Option<f64>) -> String {
    match bytes {
        None => "-".into(),
        Some(b) if b < 1e9 => format!("{:.1} MB", b / 1e6),
        Some(b) => format!("{:.0} GB", b / 1e9),
    }
}

fn format_energy(kwh: f64) -> String {
    if kwh < 1e4 {
        format!("{kwh:.1}")
    } else {
        format!("{kwh:.3e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub size: String,
    pub method: String,
    pub memory_bytes: Option<f64>,
    pub seconds: f64,
    pub energy_kwh: f64,
}

impl TableRow {
    pub fn classical(size: impl Into<String>, report: &ResourceReport) -> Self {
        let method = match report.method {
            Method::Mps => format!("MPS chi={}", report.chi),
            Method::Nqs => "NQS".to_string(),
        };
        Self {
            size: size.into(),
            method,
            memory_bytes: report.memory_bytes,
            seconds: report.total_seconds,
            energy_kwh: report.energy_kwh,
        }
    }
}

/// Aligned text table with size, method, memory, time and energy columns.
pub fn format_table(rows: &[TableRow]) -> String {
    let header = ["Size", "Method", "Mem", "Time", "Energy (kWh)"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.size.clone(),
                r.method.clone(),
                format_bytes(r.memory_bytes),
                format_duration(r.seconds),
                format_energy(r.energy_kwh),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[String]| {
        let parts: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &header.map(String::from));
    let _ = writeln!(out, "{}", widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("  "));
    for row in &cells {
        line(&mut out, row);
    }
    out
}
