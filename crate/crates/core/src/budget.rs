//! Shot budgets: precision → usable shots → attempts → wall time and energy.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::register::{defect_free_analytic, DefectProbabilities, EventCounts};

/// Largest attempt count evaluated with the exact binomial tail; above it the
/// normal approximation with continuity correction is used.
pub const EXACT_TAIL_LIMIT: u64 = 1_000_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_SHOT_RATE_HZ: f64 = 1.0;
pub const DEFAULT_QPU_POWER_W: f64 = 3200.0;
/// Worst-case Bernoulli parameter of a measured observable.
pub const DEFAULT_OBSERVABLE_P: f64 = 0.5;
pub const JOULES_PER_KWH: f64 = 3.6e6;

fn ceil_tolerant(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Shots needed to estimate a Bernoulli mean `p` to precision `alpha` at
/// roughly 95 % confidence: `ceil(16 p (1 - p) / alpha²)`.
pub fn shots_for_precision(p: f64, alpha: f64) -> Result<u64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidPrecision(alpha));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} is not a probability")));
    }
    Ok(ceil_tolerant(16.0 * p * (1.0 - p) / (alpha * alpha)) as u64)
}

/// `P(X >= m)` for `X ~ Binomial(n, p)` from the regularised incomplete beta
/// function.
pub fn binomial_tail_exact(n: u64, p: f64, m: u64) -> f64 {
    if m == 0 {
        1.0
    } else if n < m {
        0.0
    } else if p >= 1.0 {
        1.0
    } else if p <= 0.0 {
        0.0
    } else {
        beta_reg(m as f64, (n - m + 1) as f64, p)
    }
}

/// Normal approximation of `P(X >= m)` with continuity correction.
pub fn binomial_tail_normal(n: u64, p: f64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    if sd == 0.0 {
        return if mean >= m as f64 { 1.0 } else { 0.0 };
    }
    let z = (m as f64 - 0.5 - mean) / sd;
    1.0 - Normal::standard().cdf(z)
}

/// Tail used by the attempt search: exact up to [`EXACT_TAIL_LIMIT`].
pub fn binomial_tail(n: u64, p: f64, m: u64) -> f64 {
    if n <= EXACT_TAIL_LIMIT {
        binomial_tail_exact(n, p, m)
    } else {
        binomial_tail_normal(n, p, m)
    }
}

fn validate_attempt_inputs(p_df: f64, confidence: f64) -> Result<()> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::param("confidence", format!("{confidence} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&p_df) || p_df.is_nan() {
        return Err(Error::param("p_df", format!("{p_df} is not a probability")));
    }
    if p_df == 0.0 {
        return Err(Error::Unsatisfiable("defect-free probability is zero".into()));
    }
    Ok(())
}

/// Smallest `n` with `tail(n) >= confidence`, for a tail that is
/// non-decreasing in `n`.
fn smallest_n(m: u64, p_df: f64, confidence: f64, tail: impl Fn(u64) -> f64) -> Result<u64> {
    let guess = (m as f64 / p_df).max(m as f64);
    if tail(m) >= confidence {
        return Ok(m);
    }
    let mut lo = m;
    let mut hi = (guess as u64).max(m + 1);
    while tail(hi) < confidence {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| Error::Unsatisfiable(format!("no n below 2^64 reaches confidence {confidence}")))?;
    }
    // invariant: tail(lo) < confidence <= tail(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail(mid) >= confidence {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest number of attempts `n` such that at least `m` of them are
/// defect-free with probability `confidence`.
pub fn attempts_for_usable(m: u64, p_df: f64, confidence: f64) -> Result<u64> {
    validate_attempt_inputs(p_df, confidence)?;
    if m == 0 {
        return Ok(0);
    }
    if p_df == 1.0 {
        return Ok(m);
    }
    smallest_n(m, p_df, confidence, |n| binomial_tail(n, p_df, m))
}

/// Attempt count using only the exact tail (any `n`).
pub fn attempts_exact(m: u64, p_df: f64, confidence: f64) -> Result<u64> {
    validate_attempt_inputs(p_df, confidence)?;
    if m == 0 {
        return Ok(0);
    }
    smallest_n(m, p_df, confidence, |n| binomial_tail_exact(n, p_df, m))
}

/// Attempt count using only the normal approximation.
pub fn attempts_normal(m: u64, p_df: f64, confidence: f64) -> Result<u64> {
    validate_attempt_inputs(p_df, confidence)?;
    if m == 0 {
        return Ok(0);
    }
    smallest_n(m, p_df, confidence, |n| binomial_tail_normal(n, p_df, m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotBudget {
    pub m_usable: u64,
    pub alpha: f64,
    pub confidence: f64,
    pub p_defect_free: f64,
    pub n_attempts: u64,
    pub shot_rate_hz: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpuSettings {
    pub probs: DefectProbabilities,
    pub alpha: f64,
    pub confidence: f64,
    pub shot_rate_hz: f64,
    pub qpu_power_w: f64,
    /// Bernoulli parameter of the measured observable.
    pub p_observable: f64,
}

impl Default for QpuSettings {
    fn default() -> Self {
        Self {
            probs: DefectProbabilities::MEASURED,
            alpha: 0.05,
            confidence: DEFAULT_CONFIDENCE,
            shot_rate_hz: DEFAULT_SHOT_RATE_HZ,
            qpu_power_w: DEFAULT_QPU_POWER_W,
            p_observable: DEFAULT_OBSERVABLE_P,
        }
    }
}

/// Shot budget plus energy for one register size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpuSchedule {
    pub n_register: usize,
    pub counts: EventCounts,
    pub budget: ShotBudget,
    pub qpu_power_w: f64,
    pub energy_kwh: f64,
}

/// Short summary matching the shots JSON format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotsSummary {
    pub m_usable: u64,
    pub p_defect_free: f64,
    pub n_attempts: u64,
    pub wall_seconds: f64,
    pub energy_kwh: f64,
}

impl QpuSchedule {
    pub fn summary(&self) -> ShotsSummary {
        ShotsSummary {
            m_usable: self.budget.m_usable,
            p_defect_free: self.budget.p_defect_free,
            n_attempts: self.budget.n_attempts,
            wall_seconds: self.budget.wall_seconds,
            energy_kwh: self.energy_kwh,
        }
    }
}

/// Expected-counts defect-free probability → attempts → wall time and
/// energy. The per-shot time is `1 / shot_rate` independent of the pulse.
pub fn qpu_schedule(n_register: usize, settings: &QpuSettings) -> Result<QpuSchedule> {
    if n_register == 0 {
        return Err(Error::param("n_register", "must be at least 1"));
    }
    if !(settings.shot_rate_hz.is_finite() && settings.shot_rate_hz > 0.0) {
        return Err(Error::param("shot_rate_hz", format!("{} must be positive", settings.shot_rate_hz)));
    }
    if !(settings.qpu_power_w.is_finite() && settings.qpu_power_w >= 0.0) {
        return Err(Error::param("qpu_power_w", format!("{} must be non-negative", settings.qpu_power_w)));
    }
    let counts = EventCounts::expected(n_register);
    let p_df = defect_free_analytic(&counts, &settings.probs)?;
    let m = shots_for_precision(settings.p_observable, settings.alpha)?;
    let n = attempts_for_usable(m, p_df, settings.confidence)?;
    let wall_seconds = n as f64 / settings.shot_rate_hz;
    let budget = ShotBudget {
        m_usable: m,
        alpha: settings.alpha,
        confidence: settings.confidence,
        p_defect_free: p_df,
        n_attempts: n,
        shot_rate_hz: settings.shot_rate_hz,
        wall_seconds,
    };
    Ok(QpuSchedule {
        n_register,
        counts,
        budget,
        qpu_power_w: settings.qpu_power_w,
        energy_kwh: settings.qpu_power_w * wall_seconds / JOULES_PER_KWH,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct summation of the upper tail in log space.
    fn tail_by_summation(n: u64, p: f64, m: u64) -> f64 {
        let ln_choose = |n: u64, k: u64| statrs::function::factorial::ln_binomial(n, k);
        (m..=n).map(|k| (ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp()).sum()
    }

    #[test]
    fn shot_formula() {
        assert_eq!(shots_for_precision(0.5, 0.05).unwrap(), 1600);
        assert_eq!(shots_for_precision(0.0, 0.05).unwrap(), 0);
        assert_eq!(shots_for_precision(1.0, 0.05).unwrap(), 0);
        assert_eq!(shots_for_precision(0.9, 0.1).unwrap(), 144);
        assert!(matches!(shots_for_precision(0.5, 0.0), Err(Error::InvalidPrecision(_))));
    }

    #[test]
    fn exact_tail_matches_summation() {
        for &(n, p, m) in &[(50u64, 0.3, 10u64), (400, 0.067, 30), (2000, 0.5, 1001)] {
            let a = binomial_tail_exact(n, p, m);
            let b = tail_by_summation(n, p, m);
            assert!((a - b).abs() < 1e-10, "{n} {p} {m}: {a} vs {b}");
        }
    }

    #[test]
    fn attempts_edge_cases() {
        assert_eq!(attempts_for_usable(1600, 1.0, 0.95).unwrap(), 1600);
        assert_eq!(attempts_for_usable(0, 0.3, 0.95).unwrap(), 0);
        assert!(matches!(attempts_for_usable(10, 0.0, 0.95), Err(Error::Unsatisfiable(_))));
    }

    #[test]
    fn attempts_reference_value() {
        // pinned by direct tail summation
        let n = attempts_for_usable(1600, 0.067, 0.95).unwrap();
        assert_eq!(n, 24837);
        assert!(tail_by_summation(n, 0.067, 1600) >= 0.95);
        assert!(tail_by_summation(n - 1, 0.067, 1600) < 0.95);
    }

    #[test]
    fn branches_agree_at_switchover() {
        let p = 1600.0 / 1.0e6;
        let exact = attempts_exact(1600, p, 0.95).unwrap() as f64;
        let normal = attempts_normal(1600, p, 0.95).unwrap() as f64;
        assert!((exact - normal).abs() / exact < 0.01);
    }

    #[test]
    fn perfect_register_schedule() {
        let s = QpuSettings { probs: DefectProbabilities::PERFECT, ..QpuSettings::default() };
        let q = qpu_schedule(225, &s).unwrap();
        assert_eq!(q.budget.n_attempts, 1600);
        assert_eq!(q.budget.wall_seconds, 1600.0);
        assert!((q.energy_kwh - 3200.0 * 1600.0 / 3.6e6).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn attempts_are_monotone(m in 1u64..300, p in 0.05f64..0.95, c in 0.5f64..0.99) {
            let n = attempts_for_usable(m, p, c).unwrap();
            prop_assert!(n >= m);
            prop_assert!(attempts_for_usable(m, (p + 0.02).min(1.0), c).unwrap() <= n);
            prop_assert!(attempts_for_usable(m + 1, p, c).unwrap() >= n);
            prop_assert!(attempts_for_usable(m, p, (c + 0.005).min(0.999)).unwrap() >= n);
        }
    }
}
