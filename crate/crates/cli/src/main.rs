mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Output;

#[derive(Parser, Debug)]
#[command(name = "quench-bench", version, about = "Resource estimates for post-quench Rydberg Ising dynamics")]
struct Cli {
    /// TOML configuration file. Flags override file values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Print machine-readable JSON only.
    #[arg(long, global = true)]
    json: bool,

    /// Directory for output artifacts.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "QUENCH_BENCH_THREADS")]
    threads: Option<usize>,

    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve the quench and report trajectory, timings and convergence.
    Simulate {
        #[command(subcommand)]
        engine: SimulateEngine,
    },
    /// Shot budgets, QPU schedules, classical extrapolations and crossovers.
    Estimate {
        #[command(subcommand)]
        what: EstimateKind,
    },
    /// Monte Carlo of register preparation against the analytic model.
    Rearrange(RearrangeArgs),
    /// Fit a run-time scaling law to a timing CSV.
    Fit {
        #[command(subcommand)]
        method: FitKind,
    },
}

#[derive(Args, Debug, Clone, Default)]
struct QuenchArgs {
    /// Lattice as <Lx>x<Ly>.
    #[arg(long)]
    lattice: Option<String>,
    /// Pulse duration with unit suffix (e.g. 400ns, 4us).
    #[arg(long)]
    t_pulse: Option<String>,
    /// Integration step with unit suffix.
    #[arg(long)]
    dt: Option<String>,
}

#[derive(Subcommand, Debug)]
enum SimulateEngine {
    /// Dense state-vector evolution (small lattices only).
    Exact {
        #[command(flatten)]
        quench: QuenchArgs,
        /// Allow lattices up to 20 sites.
        #[arg(long)]
        allow_large: bool,
    },
    /// Two-site TDVP on a matrix product state.
    Tdvp {
        #[command(flatten)]
        quench: QuenchArgs,
        #[arg(long)]
        chi: Option<usize>,
        #[arg(long)]
        memory_budget_gb: Option<f64>,
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// Label stored in the timing CSV.
        #[arg(long, default_value = "cpu")]
        hardware_tag: String,
        /// Search the smallest converged bond dimension on this comma-separated grid instead of a single run.
        #[arg(long, value_delimiter = ',')]
        chi_grid: Option<Vec<usize>>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum InitArg {
    Ground,
    Random,
}

#[derive(Args, Debug, Clone, Default)]
struct QpuArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
    /// Bernoulli parameter of the measured observable.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    shot_rate_hz: Option<f64>,
    #[arg(long)]
    qpu_power_w: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct ModelSource {
    /// Timing CSV to fit on the fly.
    #[arg(long, conflicts_with = "model")]
    timing: Option<PathBuf>,
    /// Previously fitted model (JSON from `fit`).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mps")]
    method: MethodArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum MethodArg {
    Mps,
    Nqs,
}

#[derive(Args, Debug, Clone)]
struct ClassicalArgs {
    #[arg(long)]
    chi: Option<usize>,
    /// Pulse duration for the extrapolated run.
    #[arg(long)]
    t_pulse: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    power_w: Option<f64>,
    /// Power log (timestamp_iso8601, watts); its mean replaces --power-w.
    #[arg(long)]
    power_log: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum EstimateKind {
    /// Shots needed for the target precision and the attempts to collect them.
    Shots {
        #[command(flatten)]
        qpu: QpuArgs,
        /// Register as <Lx>x<Ly> or an atom count.
        #[arg(long)]
        register: Option<String>,
    },
    /// QPU time and energy for one or more register sizes.
    Qpu {
        #[command(flatten)]
        qpu: QpuArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        register: Vec<String>,
    },
    /// Extrapolated classical cost from a fitted scaling law.
    Classical {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        classical: ClassicalArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        size: Vec<String>,
    },
    /// Sizes beyond which the QPU beats the classical method.
    Crossover {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        classical: ClassicalArgs,
        #[command(flatten)]
        qpu: QpuArgs,
        #[arg(long, default_value_t = 4)]
        n_min: usize,
        #[arg(long, default_value_t = 1600)]
        n_max: usize,
        #[arg(long, default_value_t = 4)]
        n_step: usize,
    },
}

#[derive(Args, Debug)]
struct RearrangeArgs {
    #[arg(long)]
    trials: Option<u64>,
    /// Trap layout CSV (x_um, y_um, in_register).
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Register sizes for a generated layout (comma-separated); defaults to the lattice size.
    #[arg(long, value_delimiter = ',')]
    register: Option<Vec<usize>>,
    #[arg(long)]
    fill_p: Option<f64>,
    /// Use error-free transfer, pick-up and loading.
    #[arg(long)]
    perfect: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    timing: PathBuf,
    /// Minimise absolute instead of relative residuals.
    #[arg(long)]
    absolute: bool,
    /// Keep NQS times per worker instead of device-seconds.
    #[arg(long)]
    no_worker_normalization: bool,
    /// Only use samples with this hardware tag.
    #[arg(long)]
    hardware_tag: Option<String>,
}

#[derive(Subcommand, Debug)]
enum FitKind {
    Mps(FitArgs),
    Nqs(FitArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = Output::new(cli.json);
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            out.error(&e);
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
