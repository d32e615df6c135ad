//! Scaling-law fits of measured run times, extrapolation to large problems
//! and quantum/classical crossover search.

pub mod nnls;
mod report;

use std::collections::BTreeSet;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use report::{
    crossover, effective_chi, extrapolate, format_duration, format_table, ClassicalSettings, CrossoverPoint, CrossoverResult, ResourceReport,
    TableRow, DEFAULT_CLASSICAL_POWER_W,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Mps,
    Nqs,
}

/// One timing observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSample {
    pub n: usize,
    /// Bond dimension; 0 marks an NQS sample.
    pub chi: usize,
    pub dt_ns: f64,
    pub seconds_per_step: f64,
    pub hardware_tag: String,
    pub n_workers: usize,
}

impl RuntimeSample {
    pub fn method(&self) -> Method {
        if self.chi == 0 {
            Method::Nqs
        } else {
            Method::Mps
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TimingRow {
    #[serde(rename = "N")]
    n: usize,
    chi: usize,
    dt_ns: f64,
    seconds_per_step: f64,
    hardware_tag: String,
    n_workers: usize,
}

pub fn read_timing_csv<R: Read>(reader: R) -> Result<Vec<RuntimeSample>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize().enumerate() {
        let r: TimingRow = row?;
        if !(r.seconds_per_step.is_finite() && r.seconds_per_step > 0.0) {
            return Err(Error::Parse(format!("row {}: seconds_per_step must be positive", line + 1)));
        }
        if r.n == 0 || r.n_workers == 0 {
            return Err(Error::Parse(format!("row {}: N and n_workers must be positive", line + 1)));
        }
        out.push(RuntimeSample {
            n: r.n,
            chi: r.chi,
            dt_ns: r.dt_ns,
            seconds_per_step: r.seconds_per_step,
            hardware_tag: r.hardware_tag,
            n_workers: r.n_workers,
        });
    }
    Ok(out)
}

/// Writes the header and all samples.
pub fn write_timing_csv<W: Write>(writer: W, samples: &[RuntimeSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(TimingRow {
            n: s.n,
            chi: s.chi,
            dt_ns: s.dt_ns,
            seconds_per_step: s.seconds_per_step,
            hardware_tag: s.hardware_tag.clone(),
            n_workers: s.n_workers,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PowerRow {
    timestamp_iso8601: String,
    watts: f64,
}

/// Mean of the `watts` column of a power log.
pub fn read_power_log<R: Read>(reader: R) -> Result<f64> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in rdr.deserialize() {
        let r: PowerRow = row?;
        chrono::DateTime::parse_from_rfc3339(&r.timestamp_iso8601)
            .map_err(|e| Error::Parse(format!("timestamp `{}`: {e}", r.timestamp_iso8601)))?;
        if !(r.watts.is_finite() && r.watts >= 0.0) {
            return Err(Error::Parse(format!("power reading {} W", r.watts)));
        }
        sum += r.watts;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Parse("power log has no readings".into()));
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Weight residuals by 1/t, i.e. minimise relative errors.
    pub relative: bool,
    /// Multiply NQS run times by `n_workers` (device-seconds per step).
    pub normalize_workers: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { relative: true, normalize_workers: true }
    }
}

/// Ranges of the fitted data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDomain {
    pub n_min: usize,
    pub n_max: usize,
    pub chi_min: usize,
    pub chi_max: usize,
}

impl FitDomain {
    pub fn contains(&self, n: usize, chi: usize) -> bool {
        (self.n_min..=self.n_max).contains(&n) && (self.chi_min..=self.chi_max).contains(&chi)
    }
}

/// `t(N, chi) = a + b N^1.5 chi^3 + c N^2 chi^2` (seconds per step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelMps {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root-mean-square relative residual over the fitted samples.
    pub fit_residual: f64,
    pub domain: FitDomain,
    pub n_samples: usize,
}

impl CostModelMps {
    pub fn predict(&self, n: usize, chi: usize) -> f64 {
        let basis = mps_basis(n, chi);
        self.a * basis[0] + self.b * basis[1] + self.c * basis[2]
    }
}

/// `t(N) = a_q N + b_q N^2 + c_q N^3` (seconds per step).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModelNqs {
    pub a_q: f64,
    pub b_q: f64,
    pub c_q: f64,
    pub fit_residual: f64,
    pub domain: FitDomain,
    pub n_samples: usize,
}

impl CostModelNqs {
    pub fn predict(&self, n: usize) -> f64 {
        let basis = nqs_basis(n);
        self.a_q * basis[0] + self.b_q * basis[1] + self.c_q * basis[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "UPPERCASE")]
pub enum CostModel {
    Mps(CostModelMps),
    Nqs(CostModelNqs),
}

impl CostModel {
    pub fn method(&self) -> Method {
        match self {
            CostModel::Mps(_) => Method::Mps,
            CostModel::Nqs(_) => Method::Nqs,
        }
    }

    /// Seconds per step; `chi` is ignored for NQS.
    pub fn predict(&self, n: usize, chi: usize) -> f64 {
        match self {
            CostModel::Mps(m) => m.predict(n, chi),
            CostModel::Nqs(m) => m.predict(n),
        }
    }

    pub fn domain(&self) -> &FitDomain {
        match self {
            CostModel::Mps(m) => &m.domain,
            CostModel::Nqs(m) => &m.domain,
        }
    }

    pub fn in_domain(&self, n: usize, chi: usize) -> bool {
        match self {
            CostModel::Mps(m) => m.domain.contains(n, chi),
            CostModel::Nqs(m) => (m.domain.n_min..=m.domain.n_max).contains(&n),
        }
    }
}

fn mps_basis(n: usize, chi: usize) -> [f64; 3] {
    let (n, chi) = (n as f64, chi as f64);
    [1.0, n.powf(1.5) * chi.powi(3), n * n * chi * chi]
}

fn nqs_basis(n: usize) -> [f64; 3] {
    let n = n as f64;
    [n, n * n, n * n * n]
}

/// Weighted NNLS over a three-function basis; returns the coefficients and
/// the RMS relative residual.
fn fit_basis(rows: &[[f64; 3]], targets: &[f64], relative: bool) -> ([f64; 3], f64) {
    let m = rows.len();
    let weights: Vec<f64> = targets.iter().map(|&t| if relative { 1.0 / t } else { 1.0 }).collect();
    let a = DMatrix::from_fn(m, 3, |i, j| rows[i][j] * weights[i]);
    let b = DVector::from_fn(m, |i, _| targets[i] * weights[i]);
    let x = nnls::nnls(&a, &b);
    let coeffs = [x[0], x[1], x[2]];
    let residual = (rows
        .iter()
        .zip(targets)
        .map(|(r, &t)| {
            let pred: f64 = r.iter().zip(&coeffs).map(|(u, c)| u * c).sum();
            ((pred - t) / t).powi(2)
        })
        .sum::<f64>()
        / m as f64)
        .sqrt();
    (coeffs, residual)
}

fn domain_of(samples: &[&RuntimeSample]) -> FitDomain {
    FitDomain {
        n_min: samples.iter().map(|s| s.n).min().unwrap_or(0),
        n_max: samples.iter().map(|s| s.n).max().unwrap_or(0),
        chi_min: samples.iter().map(|s| s.chi).min().unwrap_or(0),
        chi_max: samples.iter().map(|s| s.chi).max().unwrap_or(0),
    }
}

fn basis_rank(rows: &[[f64; 3]]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    // rank of the column-normalised design matrix
    let mut a = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
    for j in 0..3 {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            a.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    a.svd(false, false).rank(1e-10)
}

/// Fits the MPS step-time law to the samples with `chi > 0`.
pub fn fit_mps(samples: &[RuntimeSample], options: &FitOptions) -> Result<CostModelMps> {
    let used: Vec<&RuntimeSample> = samples.iter().filter(|s| s.method() == Method::Mps).collect();
    let distinct_n: BTreeSet<usize> = used.iter().map(|s| s.n).collect();
    let distinct_chi: BTreeSet<usize> = used.iter().map(|s| s.chi).collect();
    if used.len() < 4 || distinct_n.len() < 2 || distinct_chi.len() < 2 {
        return Err(Error::UnderdeterminedFit(format!(
            "need at least 4 MPS samples over 2 distinct N and 2 distinct chi, got {} samples, {} N, {} chi",
            used.len(),
            distinct_n.len(),
            distinct_chi.len()
        )));
    }
    let rows: Vec<[f64; 3]> = used.iter().map(|s| mps_basis(s.n, s.chi)).collect();
    if basis_rank(&rows) < 3 {
        return Err(Error::UnderdeterminedFit("design matrix is rank deficient".into()));
    }
    let targets: Vec<f64> = used.iter().map(|s| s.seconds_per_step).collect();
    let ([a, b, c], fit_residual) = fit_basis(&rows, &targets, options.relative);
    Ok(CostModelMps { a, b, c, fit_residual, domain: domain_of(&used), n_samples: used.len() })
}

/// Fits the cubic NQS law to the samples with `chi == 0`.
pub fn fit_nqs(samples: &[RuntimeSample], options: &FitOptions) -> Result<CostModelNqs> {
    let used: Vec<&RuntimeSample> = samples.iter().filter(|s| s.method() == Method::Nqs).collect();
    let distinct_n: BTreeSet<usize> = used.iter().map(|s| s.n).collect();
    if used.len() < 4 || distinct_n.len() < 3 {
        return Err(Error::UnderdeterminedFit(format!(
            "need at least 4 NQS samples over 3 distinct N, got {} samples, {} N",
            used.len(),
            distinct_n.len()
        )));
    }
    let rows: Vec<[f64; 3]> = used.iter().map(|s| nqs_basis(s.n)).collect();
    let targets: Vec<f64> = used
        .iter()
        .map(|s| if options.normalize_workers { s.seconds_per_step * s.n_workers as f64 } else { s.seconds_per_step })
        .collect();
    let ([a_q, b_q, c_q], fit_residual) = fit_basis(&rows, &targets, options.relative);
    Ok(CostModelNqs { a_q, b_q, c_q, fit_residual, domain: domain_of(&used), n_samples: used.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample(n: usize, chi: usize, t: f64) -> RuntimeSample {
        RuntimeSample { n, chi, dt_ns: 1.0, seconds_per_step: t, hardware_tag: "test".into(), n_workers: 1 }
    }

    #[test]
    fn constant_times_give_pure_offset() {
        let samples: Vec<_> = [(9, 8), (16, 16), (25, 32), (36, 64), (9, 64)].iter().map(|&(n, c)| sample(n, c, 0.3)).collect();
        let m = fit_mps(&samples, &FitOptions::default()).unwrap();
        assert!((m.a - 0.3).abs() < 1e-12);
        assert!(m.b * 36f64.powf(1.5) * 64f64.powi(3) < 1e-12 && m.c * 36.0 * 36.0 * 64.0 * 64.0 < 1e-12);
        assert!(m.fit_residual < 1e-12);
    }

    #[test]
    fn single_point_is_underdetermined() {
        let samples = vec![sample(9, 8, 1.0); 6];
        assert!(matches!(fit_mps(&samples, &FitOptions::default()), Err(Error::UnderdeterminedFit(_))));
        assert!(matches!(fit_nqs(&[], &FitOptions::default()), Err(Error::UnderdeterminedFit(_))));
    }

    #[test]
    fn exact_mps_data_is_recovered() {
        let (a, b, c) = (0.01, 1e-12, 1e-9);
        let samples: Vec<_> = [16usize, 36, 64, 100]
            .iter()
            .flat_map(|&n| [10usize, 100, 1000].map(move |chi| (n, chi)))
            .map(|(n, chi)| sample(n, chi, a + b * (n as f64).powf(1.5) * (chi as f64).powi(3) + c * (n * n * chi * chi) as f64))
            .collect();
        let m = fit_mps(&samples, &FitOptions::default()).unwrap();
        assert!((m.a / a - 1.0).abs() < 1e-8 && (m.b / b - 1.0).abs() < 1e-8 && (m.c / c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pure_cubic_nqs_is_recovered() {
        let samples: Vec<_> = [4usize, 9, 16, 36, 100, 400].iter().map(|&n| sample(n, 0, 1e-7 * (n as f64).powi(3))).collect();
        let m = fit_nqs(&samples, &FitOptions::default()).unwrap();
        assert!((m.c_q / 1e-7 - 1.0).abs() < 1e-9);
        assert!(m.a_q * 400.0 < 1e-9 * m.c_q * 400f64.powi(3) && m.b_q * 400.0 * 400.0 < 1e-9 * m.c_q * 400f64.powi(3));
    }

    #[test]
    fn worker_normalisation_matches_single_worker_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ns = [4usize, 10, 25, 60, 150, 400, 1000];
        let truth = |n: usize| 1e-2 * n as f64 + 1e-4 * (n * n) as f64 + 1e-7 * (n as f64).powi(3);
        let single: Vec<_> = ns.iter().map(|&n| sample(n, 0, truth(n) * (1.0 + 0.05 * rng.random_range(-1.0..1.0)))).collect();
        let mixed: Vec<_> = single
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let w = if i % 2 == 0 { 1 } else { 4 };
                RuntimeSample { seconds_per_step: s.seconds_per_step / w as f64, n_workers: w, ..s.clone() }
            })
            .collect();
        let a = fit_nqs(&single, &FitOptions::default()).unwrap();
        let b = fit_nqs(&mixed, &FitOptions::default()).unwrap();
        for (x, y) in [(a.a_q, b.a_q), (a.b_q, b.b_q), (a.c_q, b.c_q)] {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1e-30));
        }
    }

    #[test]
    fn timing_csv_roundtrip() {
        let samples = vec![sample(9, 8, 0.01), RuntimeSample { n_workers: 4, ..sample(100, 0, 2.5) }];
        let mut buf = Vec::new();
        write_timing_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("N,chi,dt_ns,seconds_per_step,hardware_tag,n_workers"));
        assert_eq!(read_timing_csv(buf.as_slice()).unwrap(), samples);
        assert_eq!(samples[1].method(), Method::Nqs);
    }

    #[test]
    fn power_log_mean() {
        let log = "timestamp_iso8601,watts\n2026-01-01T00:00:00Z,300\n2026-01-01T00:00:01Z,500\n";
        assert_eq!(read_power_log(log.as_bytes()).unwrap(), 400.0);
        assert!(read_power_log("timestamp_iso8601,watts\nyesterday,3\n".as_bytes()).is_err());
    }
}
