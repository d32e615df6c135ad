//! TOML run configuration. Every key is optional; missing keys take the
//! documented defaults and command-line flags override both.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::budget::{QpuSettings, DEFAULT_CONFIDENCE, DEFAULT_OBSERVABLE_P, DEFAULT_QPU_POWER_W, DEFAULT_SHOT_RATE_HZ};
use crate::convergence::DEFAULT_CHI_GRID;
use crate::costfit::{ClassicalSettings, DEFAULT_CLASSICAL_POWER_W};
use crate::error::{Error, Result};
use crate::model::{interactions, reference_setup, InteractionMatrix, LatticeSpec, QuenchParams, DEFAULT_CUTOFF_FACTOR, DEFAULT_H_X};
use crate::mps::{InitialState, QuenchOptions, TdvpConfig, DEFAULT_K_MAX, DEFAULT_MEMORY_BUDGET};
use crate::register::{DefectProbabilities, TrapLayout};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lattice: LatticeSection,
    pub physics: PhysicsSection,
    pub quench: QuenchSection,
    pub tdvp: TdvpSection,
    pub convergence: ConvergenceSection,
    pub register: RegisterSection,
    pub qpu: QpuSection,
    pub classical: ClassicalSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "Lx")]
    pub lx: usize,
    #[serde(rename = "Ly")]
    pub ly: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { lx: 3, ly: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    /// Rabi frequency Ω/2π in MHz.
    pub omega_mhz: f64,
    pub h_x: f64,
    /// C6/2π in GHz·µm⁶.
    pub c6_ghz_um6: f64,
    /// Interaction cutoff in units of the lattice spacing.
    pub cutoff_factor: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self { omega_mhz: 2.0, h_x: DEFAULT_H_X, c6_ghz_um6: 138.0, cutoff_factor: DEFAULT_CUTOFF_FACTOR }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuenchSection {
    pub t_pulse_ns: f64,
    pub dt_ns: f64,
}

impl Default for QuenchSection {
    fn default() -> Self {
        Self { t_pulse_ns: 400.0, dt_ns: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    #[default]
    Ground,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdvpSection {
    pub max_chi: usize,
    pub k_max: usize,
    pub memory_budget_gb: f64,
    pub initial: InitialKind,
    pub measure: bool,
}

impl Default for TdvpSection {
    fn default() -> Self {
        Self {
            max_chi: 64,
            k_max: DEFAULT_K_MAX,
            memory_budget_gb: DEFAULT_MEMORY_BUDGET / 1e9,
            initial: InitialKind::Ground,
            measure: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub chi_grid: Vec<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self { chi_grid: DEFAULT_CHI_GRID.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegisterSection {
    /// Layout CSV; when absent a `cols × rows` grid with a central register
    /// is generated.
    pub layout: Option<PathBuf>,
    pub cols: usize,
    pub rows: usize,
    /// Register size for generated layouts; defaults to the lattice size.
    pub n_register: Option<usize>,
    pub pitch_um: f64,
    pub fill_p: f64,
    pub trials: u64,
    pub p_transf: f64,
    pub p_pickup: f64,
    pub p_acci: f64,
    pub p_loss: f64,
}

impl Default for RegisterSection {
    fn default() -> Self {
        let p = DefectProbabilities::MEASURED;
        Self {
            layout: None,
            cols: 20,
            rows: 10,
            n_register: None,
            pitch_um: 5.0,
            fill_p: 0.5,
            trials: 100_000,
            p_transf: p.p_transf,
            p_pickup: p.p_pickup,
            p_acci: p.p_acci,
            p_loss: p.p_loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpuSection {
    pub alpha: f64,
    pub confidence: f64,
    pub shot_rate_hz: f64,
    pub power_w: f64,
    pub p_observable: f64,
}

impl Default for QpuSection {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            confidence: DEFAULT_CONFIDENCE,
            shot_rate_hz: DEFAULT_SHOT_RATE_HZ,
            power_w: DEFAULT_QPU_POWER_W,
            p_observable: DEFAULT_OBSERVABLE_P,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalSection {
    pub chi: usize,
    pub t_pulse_ns: f64,
    pub power_w: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self { chi: 1000, t_pulse_ns: 4000.0, power_w: DEFAULT_CLASSICAL_POWER_W }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serialisable")
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.physics.omega_mhz * 1e6
    }

    pub fn c6(&self) -> f64 {
        2.0 * PI * self.physics.c6_ghz_um6 * 1e9
    }

    /// Lattice at the derived spacing and the quench parameters with timing.
    pub fn setup(&self) -> Result<(LatticeSpec, QuenchParams)> {
        let (lattice, params) = reference_setup(self.lattice.lx, self.lattice.ly, self.omega(), self.physics.h_x, self.c6())?;
        let params = params.with_timing(self.quench.t_pulse_ns * 1e-9, self.quench.dt_ns * 1e-9)?;
        Ok((lattice, params))
    }

    pub fn interactions(&self, lattice: &LatticeSpec, params: &QuenchParams) -> Result<InteractionMatrix> {
        interactions(lattice, params, self.physics.cutoff_factor * params.spacing_um)
    }

    pub fn quench_options(&self) -> QuenchOptions {
        QuenchOptions {
            tdvp: TdvpConfig { max_chi: self.tdvp.max_chi, k_max: self.tdvp.k_max, ..TdvpConfig::default() },
            memory_budget_bytes: self.tdvp.memory_budget_gb * 1e9,
            initial: match self.tdvp.initial {
                InitialKind::Ground => InitialState::Ground,
                InitialKind::Random => InitialState::Random { seed: self.run.seed },
            },
            measure: self.tdvp.measure,
        }
    }

    pub fn probabilities(&self) -> DefectProbabilities {
        let r = &self.register;
        DefectProbabilities { p_transf: r.p_transf, p_pickup: r.p_pickup, p_acci: r.p_acci, p_loss: r.p_loss }
    }

    pub fn layout(&self) -> Result<TrapLayout> {
        let r = &self.register;
        match &r.layout {
            Some(path) => TrapLayout::read_csv(std::fs::File::open(path)?),
            None => {
                let n = r.n_register.unwrap_or(self.lattice.lx * self.lattice.ly);
                TrapLayout::grid_with_central_register(r.cols, r.rows, n, r.pitch_um)
            }
        }
    }

    pub fn qpu_settings(&self) -> QpuSettings {
        QpuSettings {
            probs: self.probabilities(),
            alpha: self.qpu.alpha,
            confidence: self.qpu.confidence,
            shot_rate_hz: self.qpu.shot_rate_hz,
            qpu_power_w: self.qpu.power_w,
            p_observable: self.qpu.p_observable,
        }
    }

    pub fn classical_settings(&self) -> ClassicalSettings {
        ClassicalSettings {
            chi: self.classical.chi,
            t_pulse: self.classical.t_pulse_ns * 1e-9,
            dt: self.quench.dt_ns * 1e-9,
            power_watts: self.classical.power_w,
        }
    }
}

/// Parses a duration with an explicit `ns`, `us`/`µs` or `s` suffix into
/// seconds.
pub fn parse_duration(text: &str) -> Result<f64> {
    let t = text.trim();
    let (number, scale) = if let Some(v) = t.strip_suffix("ns") {
        (v, 1e-9)
    } else if let Some(v) = t.strip_suffix("us").or_else(|| t.strip_suffix("µs")) {
        (v, 1e-6)
    } else if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else {
        return Err(Error::Parse(format!("duration '{text}' needs a unit suffix (ns, us, ms, s)")));
    };
    let value: f64 = number.trim().parse().map_err(|_| Error::Parse(format!("invalid duration '{text}'")))?;
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::Parse(format!("duration '{text}' must be non-negative")));
    }
    Ok(value * scale)
}

/// Parses `LxxLy` (e.g. `15x15`) into `(lx, ly)`.
pub fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let err = || Error::Parse(format!("expected <Lx>x<Ly>, got '{text}'"));
    let (a, b) = text.trim().split_once(['x', 'X']).ok_or_else(err)?;
    let lx: usize = a.trim().parse().map_err(|_| err())?;
    let ly: usize = b.trim().parse().map_err(|_| err())?;
    if lx == 0 || ly == 0 {
        return Err(err());
    }
    Ok((lx, ly))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DEFAULT_C6, DEFAULT_OMEGA};

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        assert!((c.omega() - DEFAULT_OMEGA).abs() < 1e-6);
        assert!((c.c6() - DEFAULT_C6).abs() < 1e-3);
    }

    #[test]
    fn sections_override_defaults() {
        let c = Config::from_toml_str(
            "[lattice]\nLx = 4\nLy = 2\n[quench]\nt_pulse_ns = 100\n[tdvp]\ninitial = \"random\"\n[run]\nseed = 7\n",
        )
        .unwrap();
        assert_eq!((c.lattice.lx, c.lattice.ly), (4, 2));
        assert_eq!(c.quench.dt_ns, 1.0);
        let (l, p) = c.setup().unwrap();
        assert_eq!(l.n_sites(), 8);
        assert_eq!(p.n_steps(), 100);
        assert_eq!(c.quench_options().initial, InitialState::Random { seed: 7 });
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::from_toml_str("[lattice]\nLz = 3\n"), Err(Error::Config(_))));
    }

    #[test]
    fn round_trip() {
        let c = Config::default();
        assert_eq!(Config::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn durations() {
        assert!((parse_duration("400ns").unwrap() - 4e-7).abs() < 1e-20);
        assert!((parse_duration("4us").unwrap() - 4e-6).abs() < 1e-18);
        assert!((parse_duration("4 µs").unwrap() - 4e-6).abs() < 1e-18);
        assert_eq!(parse_duration("2s").unwrap(), 2.0);
        assert!(parse_duration("400").is_err());
        assert!(parse_duration("-1ns").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("15x15").unwrap(), (15, 15));
        assert_eq!(parse_grid("4X2").unwrap(), (4, 2));
        assert!(parse_grid("15").is_err());
        assert!(parse_grid("0x3").is_err());
    }
}
