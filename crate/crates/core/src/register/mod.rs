//! Register preparation: stochastic tweezer loading, rearrangement by optimal
//! assignment, and the probability of ending with a defect-free register.

pub mod hungarian;

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};

/// Per-event success/failure probabilities of the four elementary channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectProbabilities {
    /// Successful transfer of an atom into an empty register site.
    pub p_transf: f64,
    /// Successful removal of a surplus atom.
    pub p_pickup: f64,
    /// Accidental loading of an idle trap.
    pub p_acci: f64,
    /// Loss of an atom that stays in place.
    pub p_loss: f64,
}

impl DefectProbabilities {
    /// Measured values used throughout the benchmarks.
    pub const MEASURED: Self = Self { p_transf: 0.989, p_pickup: 0.998, p_acci: 0.0009, p_loss: 0.009 };
    pub const PERFECT: Self = Self { p_transf: 1.0, p_pickup: 1.0, p_acci: 0.0, p_loss: 0.0 };

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_transf", self.p_transf), ("p_pickup", self.p_pickup), ("p_acci", self.p_acci), ("p_loss", self.p_loss)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("{p} is not a probability")));
            }
        }
        Ok(())
    }
}

impl Default for DefectProbabilities {
    fn default() -> Self {
        Self::MEASURED
    }
}

/// Trap positions and the subset forming the target register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapLayout {
    positions: Vec<[f64; 2]>,
    in_register: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutRow {
    x_um: f64,
    y_um: f64,
    in_register: u8,
}

impl TrapLayout {
    /// Requires at least twice as many traps as register sites.
    pub fn new(positions: Vec<[f64; 2]>, in_register: Vec<bool>) -> Result<Self> {
        if positions.len() != in_register.len() {
            return Err(Error::param("layout", "positions and register mask differ in length"));
        }
        let n_register = in_register.iter().filter(|&&r| r).count();
        if n_register == 0 {
            return Err(Error::param("layout", "register is empty"));
        }
        if positions.len() < 2 * n_register {
            return Err(Error::param(
                "layout",
                format!("{} traps cannot host a {n_register}-site register (need at least twice as many)", positions.len()),
            ));
        }
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::param("layout", "non-finite trap coordinate"));
        }
        Ok(Self { positions, in_register })
    }

    /// `l × l` register on a square grid of pitch `pitch_um`, surrounded by
    /// `l²` reservoir traps filling the nearest shells around it.
    pub fn square_with_reservoir(l: usize, pitch_um: f64) -> Result<Self> {
        if l == 0 || !(pitch_um > 0.0) {
            return Err(Error::param("layout", "register side and pitch must be positive"));
        }
        let n_register = l * l;
        let centre = (l as f64 - 1.0) / 2.0;
        // enough margin on each side to host l² extra traps
        let margin = l.div_ceil(2) + 1;
        let lo = -(margin as i64);
        let hi = (l + margin) as i64;
        let mut reservoir = Vec::new();
        for row in lo..hi {
            for col in lo..hi {
                let inside = (0..l as i64).contains(&row) && (0..l as i64).contains(&col);
                if !inside {
                    let dx = col as f64 - centre;
                    let dy = row as f64 - centre;
                    reservoir.push((dx.abs().max(dy.abs()), dx.hypot(dy), row, col));
                }
            }
        }
        reservoir.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then((a.2, a.3).cmp(&(b.2, b.3))));
        let mut positions = Vec::with_capacity(2 * n_register);
        let mut mask = Vec::with_capacity(2 * n_register);
        for row in 0..l {
            for col in 0..l {
                positions.push([col as f64 * pitch_um, row as f64 * pitch_um]);
                mask.push(true);
            }
        }
        for &(_, _, row, col) in reservoir.iter().take(n_register) {
            positions.push([col as f64 * pitch_um, row as f64 * pitch_um]);
            mask.push(false);
        }
        Self::new(positions, mask)
    }

    /// Rectangular grid of `cols × rows` traps whose register consists of the
    /// `n_register` traps closest to the grid centre (ties by trap index).
    pub fn grid_with_central_register(cols: usize, rows: usize, n_register: usize, pitch_um: f64) -> Result<Self> {
        if cols == 0 || rows == 0 || !(pitch_um > 0.0) {
            return Err(Error::param("layout", "grid dimensions and pitch must be positive"));
        }
        let positions: Vec<[f64; 2]> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| [c as f64 * pitch_um, r as f64 * pitch_um]))
            .collect();
        let cx = (cols as f64 - 1.0) / 2.0 * pitch_um;
        let cy = (rows as f64 - 1.0) / 2.0 * pitch_um;
        let mut order: Vec<usize> = (0..positions.len()).collect();
        let dist = |k: usize| (positions[k][0] - cx).hypot(positions[k][1] - cy);
        order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        let mut mask = vec![false; positions.len()];
        for &k in order.iter().take(n_register) {
            mask[k] = true;
        }
        Self::new(positions, mask)
    }

    pub fn n_traps(&self) -> usize {
        self.positions.len()
    }

    pub fn n_register(&self) -> usize {
        self.in_register.iter().filter(|&&r| r).count()
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    pub fn in_register(&self, trap: usize) -> bool {
        self.in_register[trap]
    }

    pub fn register_traps(&self) -> Vec<usize> {
        (0..self.n_traps()).filter(|&k| self.in_register[k]).collect()
    }

    fn distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.positions[a], self.positions[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut positions = Vec::new();
        let mut mask = Vec::new();
        for row in rdr.deserialize() {
            let row: LayoutRow = row?;
            if row.in_register > 1 {
                return Err(Error::Parse(format!("in_register must be 0 or 1, got {}", row.in_register)));
            }
            positions.push([row.x_um, row.y_um]);
            mask.push(row.in_register == 1);
        }
        Self::new(positions, mask)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (p, &r) in self.positions.iter().zip(&self.in_register) {
            w.serialize(LayoutRow { x_um: p[0], y_um: p[1], in_register: u8::from(r) })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// RNG stream for one trial, derived from the run seed and the trial index.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Independent Bernoulli(`fill_p`) loading of every trap.
pub fn load_stochastic<R: Rng + ?Sized>(layout: &TrapLayout, fill_p: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&fill_p) {
        return Err(Error::param("fill_p", format!("{fill_p} is not a probability")));
    }
    Ok((0..layout.n_traps()).map(|_| rng.random_bool(fill_p)).collect())
}

/// Loading with a fresh RNG seeded from `seed`.
pub fn load_seeded(layout: &TrapLayout, fill_p: f64, seed: u64) -> Result<Vec<bool>> {
    load_stochastic(layout, fill_p, &mut trial_rng(seed, 0))
}

/// Event counts entering the defect-free probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub n_transf: usize,
    pub n_dump: usize,
    pub n_traps: usize,
    pub n_register: usize,
}

impl EventCounts {
    /// Traps touched by neither a transfer nor a dump.
    pub fn n_idle(&self) -> Option<usize> {
        self.n_traps.checked_sub(self.n_transf + self.n_dump)
    }

    /// Counts expected for 50 % loading of `2N` traps: half of the register
    /// needs filling and as many surplus atoms are dumped.
    pub fn expected(n_register: usize) -> Self {
        let half = n_register.div_ceil(2);
        Self { n_transf: half, n_dump: half, n_traps: 2 * n_register, n_register }
    }
}

/// Average counts over many plans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCounts {
    pub n_transf: f64,
    pub n_dump: f64,
    pub n_traps: f64,
    pub n_register: f64,
}

impl From<EventCounts> for MeanCounts {
    fn from(c: EventCounts) -> Self {
        Self { n_transf: c.n_transf as f64, n_dump: c.n_dump as f64, n_traps: c.n_traps as f64, n_register: c.n_register as f64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementPlan {
    /// `(source_trap, target_trap)` pairs.
    pub moves: Vec<(usize, usize)>,
    /// Surplus atoms removed from the array.
    pub dumps: Vec<usize>,
    pub counts: EventCounts,
    /// Total Euclidean move distance (µm).
    pub total_distance: f64,
}

/// Fills empty register sites with surplus atoms by minimum total distance
/// and dumps what is left. Atoms already on register sites stay.
pub fn plan_rearrangement(layout: &TrapLayout, occupancy: &[bool]) -> Result<RearrangementPlan> {
    if occupancy.len() != layout.n_traps() {
        return Err(Error::param("occupancy", format!("{} entries for {} traps", occupancy.len(), layout.n_traps())));
    }
    let empty: Vec<usize> = (0..layout.n_traps()).filter(|&k| layout.in_register(k) && !occupancy[k]).collect();
    let surplus: Vec<usize> = (0..layout.n_traps()).filter(|&k| !layout.in_register(k) && occupancy[k]).collect();
    if surplus.len() < empty.len() {
        return Err(Error::NotEnoughAtoms {
            needed: layout.n_register(),
            available: occupancy.iter().filter(|&&o| o).count(),
        });
    }
    let cost: Vec<f64> = empty.iter().flat_map(|&t| surplus.iter().map(move |&s| layout.distance(s, t))).collect();
    let assignment = hungarian::assign(&cost, empty.len(), surplus.len());
    let total_distance = hungarian::assignment_cost(&cost, surplus.len(), &assignment);
    let mut taken = vec![false; surplus.len()];
    let moves: Vec<(usize, usize)> = assignment
        .iter()
        .zip(&empty)
        .map(|(&j, &target)| {
            taken[j] = true;
            (surplus[j], target)
        })
        .collect();
    let dumps: Vec<usize> = surplus.iter().zip(&taken).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
    let counts = EventCounts { n_transf: moves.len(), n_dump: dumps.len(), n_traps: layout.n_traps(), n_register: layout.n_register() };
    Ok(RearrangementPlan { moves, dumps, counts, total_distance })
}

fn product_probability(n_transf: f64, n_dump: f64, n_idle: f64, n_unmoved: f64, probs: &DefectProbabilities) -> f64 {
    // powf(0) = 1 even for a zero base, so perfect channels drop out cleanly
    probs.p_transf.powf(n_transf)
        * probs.p_pickup.powf(n_dump)
        * (1.0 - probs.p_acci).powf(n_idle)
        * (1.0 - probs.p_loss).powf(n_unmoved)
}

/// Probability that every transfer and dump succeeds, no idle trap loads an
/// atom and no stationary register atom is lost.
pub fn defect_free_analytic(counts: &EventCounts, probs: &DefectProbabilities) -> Result<f64> {
    probs.validate()?;
    let idle = counts
        .n_idle()
        .ok_or_else(|| Error::InvalidCounts(format!("{} transfers + {} dumps exceed {} traps", counts.n_transf, counts.n_dump, counts.n_traps)))?;
    let unmoved = counts
        .n_register
        .checked_sub(counts.n_transf)
        .ok_or_else(|| Error::InvalidCounts(format!("{} transfers exceed {} register sites", counts.n_transf, counts.n_register)))?;
    Ok(product_probability(counts.n_transf as f64, counts.n_dump as f64, idle as f64, unmoved as f64, probs))
}

/// Same product evaluated at fractional (mean) counts.
pub fn defect_free_at_mean(counts: &MeanCounts, probs: &DefectProbabilities) -> Result<f64> {
    probs.validate()?;
    let idle = counts.n_traps - counts.n_transf - counts.n_dump;
    let unmoved = counts.n_register - counts.n_transf;
    if idle < -1e-9 || unmoved < -1e-9 {
        return Err(Error::InvalidCounts(format!("inconsistent mean counts {counts:?}")));
    }
    Ok(product_probability(counts.n_transf, counts.n_dump, idle.max(0.0), unmoved.max(0.0), probs))
}

/// Probability that a Bernoulli(`fill_p`) load of the layout has at least as
/// many atoms as register sites.
pub fn enough_atoms_probability(layout: &TrapLayout, fill_p: f64) -> Result<f64> {
    let (n, r) = (layout.n_traps() as u64, layout.n_register() as u64);
    let bin = Binomial::new(fill_p, n).map_err(|e| Error::param("fill_p", e.to_string()))?;
    Ok(if r == 0 { 1.0 } else { bin.sf(r - 1) })
}

/// Monte Carlo frequency of defect-free outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectFreeEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub trials: u64,
    /// Mean counts over trials with enough atoms (all zero if none).
    pub counts_mean: MeanCounts,
    /// Fraction of trials that loaded enough atoms.
    pub feasible_fraction: f64,
}

impl DefectFreeEstimate {
    /// Analytic counterpart: the chance of loading enough atoms times the
    /// product formula at the mean counts of the feasible trials.
    pub fn analytic_reference(&self, layout: &TrapLayout, fill_p: f64, probs: &DefectProbabilities) -> Result<f64> {
        let enough = enough_atoms_probability(layout, fill_p)?;
        if self.feasible_fraction == 0.0 {
            return Ok(0.0);
        }
        Ok(enough * defect_free_at_mean(&self.counts_mean, probs)?)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialTally {
    successes: u64,
    feasible: u64,
    n_transf: u64,
    n_dump: u64,
}

impl TrialTally {
    fn merge(self, other: Self) -> Self {
        Self {
            successes: self.successes + other.successes,
            feasible: self.feasible + other.feasible,
            n_transf: self.n_transf + other.n_transf,
            n_dump: self.n_dump + other.n_dump,
        }
    }
}

/// Runs a single shot preparation; returns the plan counts (if any) and
/// whether the register ended defect-free.
pub fn simulate_trial<R: Rng + ?Sized>(
    layout: &TrapLayout,
    probs: &DefectProbabilities,
    fill_p: f64,
    rng: &mut R,
) -> Result<(Option<EventCounts>, bool)> {
    let occupancy = load_stochastic(layout, fill_p, rng)?;
    let plan = match plan_rearrangement(layout, &occupancy) {
        Ok(plan) => plan,
        Err(Error::NotEnoughAtoms { .. }) => return Ok((None, false)),
        Err(e) => return Err(e),
    };
    let c = plan.counts;
    let idle = c.n_idle().expect("plan counts are consistent");
    let unmoved = c.n_register - c.n_transf;
    // every channel is sampled so the stream layout does not depend on
    // earlier failures
    let mut ok = true;
    for _ in 0..c.n_transf {
        ok &= rng.random_bool(probs.p_transf);
    }
    for _ in 0..c.n_dump {
        ok &= rng.random_bool(probs.p_pickup);
    }
    for _ in 0..idle {
        ok &= !rng.random_bool(probs.p_acci);
    }
    for _ in 0..unmoved {
        ok &= !rng.random_bool(probs.p_loss);
    }
    Ok((Some(c), ok))
}

/// Estimates the defect-free probability from `trials` independent shots.
/// Trial `i` draws from the stream `(seed, i)`, so results do not depend on
/// the number of worker threads.
pub fn simulate_defect_free(
    layout: &TrapLayout,
    probs: &DefectProbabilities,
    fill_p: f64,
    trials: u64,
    seed: u64,
) -> Result<DefectFreeEstimate> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    probs.validate()?;
    if !(0.0..=1.0).contains(&fill_p) {
        return Err(Error::param("fill_p", format!("{fill_p} is not a probability")));
    }
    let tally = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let (counts, ok) = simulate_trial(layout, probs, fill_p, &mut rng).expect("validated inputs");
            let mut t = TrialTally { successes: u64::from(ok), ..TrialTally::default() };
            if let Some(c) = counts {
                t.feasible = 1;
                t.n_transf = c.n_transf as u64;
                t.n_dump = c.n_dump as u64;
            }
            t
        })
        .reduce(TrialTally::default, TrialTally::merge);
    let p_hat = tally.successes as f64 / trials as f64;
    let std_err = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    let feasible = tally.feasible.max(1) as f64;
    let counts_mean = if tally.feasible == 0 {
        MeanCounts { n_transf: 0.0, n_dump: 0.0, n_traps: layout.n_traps() as f64, n_register: layout.n_register() as f64 }
    } else {
        MeanCounts {
            n_transf: tally.n_transf as f64 / feasible,
            n_dump: tally.n_dump as f64 / feasible,
            n_traps: layout.n_traps() as f64,
            n_register: layout.n_register() as f64,
        }
    };
    Ok(DefectFreeEstimate { p_hat, std_err, trials, counts_mean, feasible_fraction: tally.feasible as f64 / trials as f64 })
}
