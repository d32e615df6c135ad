use std::fs::File;
use std::path::{Path, PathBuf};

use quench_core::budget::{qpu_schedule, shots_for_precision};
use quench_core::config::{parse_duration, parse_grid, Config, InitialKind};
use quench_core::convergence::{min_converged_chi, verdict_scale, ConvergenceVerdict};
use quench_core::costfit::{
    crossover, effective_chi, extrapolate, fit_mps, fit_nqs, format_duration, format_table, read_power_log, read_timing_csv,
    write_timing_csv, CostModel, FitOptions, Method, RuntimeSample, TableRow,
};
use quench_core::manifest::RunManifest;
use quench_core::mps::run_quench;
use quench_core::observables::write_trajectory_csv;
use quench_core::oracle::{evolve_exact, OracleOptions};
use quench_core::register::{simulate_defect_free, DefectProbabilities, TrapLayout};
use quench_core::{Error, Result};
use serde_json::{json, Value};

use crate::output::{write_json, Output};
use crate::{ClassicalArgs, Cli, Command, EstimateKind, FitKind, InitArg, MethodArg, ModelSource, QpuArgs, QuenchArgs, RearrangeArgs, SimulateEngine};

struct Ctx {
    config: Config,
    out: Output,
    out_dir: Option<PathBuf>,
    inputs: Vec<PathBuf>,
}

impl Ctx {
    fn manifest(&self, command: &str) -> Result<RunManifest> {
        let mut m = RunManifest::new(command, self.config.run.seed, &self.config)?;
        for p in &self.inputs {
            m.add_input(p)?;
        }
        Ok(m)
    }

    fn out_path(&self, name: &str) -> Result<Option<PathBuf>> {
        match &self.out_dir {
            None => Ok(None),
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Ok(Some(dir.join(name)))
            }
        }
    }

    /// Emits `result` with the reproducible manifest embedded, and writes it
    /// plus the full manifest to the output directory when one is set.
    fn finish(&self, mut manifest: RunManifest, artifact: &str, result: Value, text: impl FnOnce() -> String) -> Result<()> {
        manifest.finish();
        let doc = json!({ "manifest": manifest.reproducible(), "result": result });
        if let Some(path) = self.out_path(artifact)? {
            write_json(&path, &doc)?;
            write_json(&self.out_path("manifest.json")?.expect("output dir"), &manifest)?;
        }
        self.out.emit(&doc, text);
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let mut inputs: Vec<PathBuf> = cli.config.iter().cloned().collect();
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(t) = cli.threads {
        config.run.threads = Some(t);
    }
    if let Some(t) = config.run.threads {
        // a second initialisation only happens in-process (tests); ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    collect_inputs(&cli.command, &mut inputs);
    let mut ctx = Ctx { config, out: Output::new(cli.json), out_dir: cli.out.clone(), inputs };
    match &cli.command {
        Command::Simulate { engine } => simulate(&mut ctx, engine),
        Command::Estimate { what } => estimate(&mut ctx, what),
        Command::Rearrange(args) => rearrange(&mut ctx, args),
        Command::Fit { method } => fit(&mut ctx, method),
    }
}

fn collect_inputs(command: &Command, inputs: &mut Vec<PathBuf>) {
    let mut push = |p: &Option<PathBuf>| inputs.extend(p.iter().cloned());
    match command {
        Command::Estimate { what } => match what {
            EstimateKind::Classical { source, classical, .. } | EstimateKind::Crossover { source, classical, .. } => {
                push(&source.timing);
                push(&source.model);
                push(&classical.power_log);
            }
            _ => {}
        },
        Command::Rearrange(a) => push(&a.layout),
        Command::Fit { method: FitKind::Mps(a) | FitKind::Nqs(a) } => push(&Some(a.timing.clone())),
        Command::Simulate { .. } => {}
    }
}

fn apply_quench(config: &mut Config, q: &QuenchArgs) -> Result<()> {
    if let Some(l) = &q.lattice {
        let (lx, ly) = parse_grid(l)?;
        config.lattice.lx = lx;
        config.lattice.ly = ly;
    }
    if let Some(t) = &q.t_pulse {
        config.quench.t_pulse_ns = parse_duration(t)? * 1e9;
    }
    if let Some(dt) = &q.dt {
        config.quench.dt_ns = parse_duration(dt)? * 1e9;
    }
    Ok(())
}

fn simulate(ctx: &mut Ctx, engine: &SimulateEngine) -> Result<()> {
    match engine {
        SimulateEngine::Exact { quench, allow_large } => {
            apply_quench(&mut ctx.config, quench)?;
            let manifest = ctx.manifest("simulate exact")?;
            let (lattice, params) = ctx.config.setup()?;
            let v = ctx.config.interactions(&lattice, &params)?;
            let traj = evolve_exact(&lattice, &params, &v, params.t_pulse, params.dt, OracleOptions { allow_large: *allow_large })?;
            let energies: Vec<f64> = traj.snapshots.iter().map(|s| s.energy).collect();
            let final_map = &traj.snapshots.last().expect("initial snapshot").occupation;
            let verdict = ConvergenceVerdict::evaluate(&energies, verdict_scale(&params, lattice.n_sites()), final_map, None)?;
            if let Some(p) = ctx.out_path("trajectory.csv")? {
                write_trajectory_csv(File::create(p)?, &traj.snapshots)?;
            }
            let result = json!({
                "engine": "exact",
                "n_sites": lattice.n_sites(),
                "n_snapshots": traj.snapshots.len(),
                "final_occupation": final_map.values(),
                "verdict": verdict,
            });
            ctx.finish(manifest, "verdict.json", result, || verdict_text("exact", lattice.n_sites(), traj.snapshots.len(), &verdict))
        }
        SimulateEngine::Tdvp { quench, chi, memory_budget_gb, init, hardware_tag, chi_grid } => {
            apply_quench(&mut ctx.config, quench)?;
            let t = &mut ctx.config.tdvp;
            if let Some(c) = chi {
                t.max_chi = *c;
            }
            if let Some(m) = memory_budget_gb {
                t.memory_budget_gb = *m;
            }
            if let Some(i) = init {
                t.initial = match i {
                    InitArg::Ground => InitialKind::Ground,
                    InitArg::Random => InitialKind::Random,
                };
            }
            if let Some(g) = chi_grid {
                ctx.config.convergence.chi_grid = g.clone();
            }
            let (lattice, params) = ctx.config.setup()?;
            let v = ctx.config.interactions(&lattice, &params)?;
            let options = ctx.config.quench_options();
            if chi_grid.is_some() {
                let manifest = ctx.manifest("simulate tdvp --chi-grid")?;
                let search = min_converged_chi(&lattice, &params, &v, &ctx.config.convergence.chi_grid, &options)?;
                let result = serde_json::to_value(&search)?;
                let text = match search.chi() {
                    Some(c) => format!("smallest converged chi: {c}\n"),
                    None => "UNCONVERGED on the given grid\n".to_string(),
                };
                return ctx.finish(manifest, "chi_search.json", result, || text);
            }
            let manifest = ctx.manifest("simulate tdvp")?;
            let run = run_quench(&lattice, &params, &v, &options)?;
            let verdict = ConvergenceVerdict::for_run(&run, verdict_scale(&params, lattice.n_sites()))?;
            let samples: Vec<RuntimeSample> = run
                .records
                .iter()
                .map(|r| RuntimeSample {
                    n: lattice.n_sites(),
                    chi: options.tdvp.max_chi,
                    dt_ns: params.dt * 1e9,
                    seconds_per_step: r.wall_seconds,
                    hardware_tag: hardware_tag.clone(),
                    n_workers: 1,
                })
                .collect();
            if let Some(p) = ctx.out_path("trajectory.csv")? {
                write_trajectory_csv(File::create(p)?, &run.snapshots)?;
            }
            if let Some(p) = ctx.out_path("timing.csv")? {
                write_timing_csv(File::create(p)?, &samples)?;
            }
            let result = json!({
                "engine": "tdvp",
                "n_sites": lattice.n_sites(),
                "max_chi": options.tdvp.max_chi,
                "n_steps": run.records.len(),
                "max_bond_used": run.final_state.max_bond(),
                "truncation_weight": run.final_state.truncation_weight(),
                "mean_step_seconds": run.mean_step_seconds(),
                "mpo_bond_profile": run.mpo_bond_profile,
                "final_occupation": run.final_map().values(),
                "verdict": verdict,
            });
            let n_snap = run.snapshots.len();
            ctx.finish(manifest, "verdict.json", result, || verdict_text("tdvp", lattice.n_sites(), n_snap, &verdict))
        }
    }
}

fn verdict_text(engine: &str, n: usize, snapshots: usize, v: &ConvergenceVerdict) -> String {
    format!(
        "{engine}: {n} sites, {snapshots} snapshots\nenergy drift {:.3e} (of E_scale {:.4e} rad/s), D8 error {:.3e}: {}\n",
        v.energy_drift_rel,
        v.e_scale,
        v.d8_error_rel,
        if v.passed { "converged" } else { "NOT converged" }
    )
}

fn parse_register(text: &str) -> Result<usize> {
    match text.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => parse_grid(text).map(|(a, b)| a * b),
    }
}

fn apply_qpu(config: &mut Config, q: &QpuArgs) {
    let s = &mut config.qpu;
    if let Some(v) = q.alpha {
        s.alpha = v;
    }
    if let Some(v) = q.confidence {
        s.confidence = v;
    }
    if let Some(v) = q.p {
        s.p_observable = v;
    }
    if let Some(v) = q.shot_rate_hz {
        s.shot_rate_hz = v;
    }
    if let Some(v) = q.qpu_power_w {
        s.power_w = v;
    }
}

fn apply_classical(config: &mut Config, c: &ClassicalArgs) -> Result<()> {
    if let Some(chi) = c.chi {
        config.classical.chi = chi;
    }
    if let Some(t) = &c.t_pulse {
        config.classical.t_pulse_ns = parse_duration(t)? * 1e9;
    }
    if let Some(dt) = &c.dt {
        config.quench.dt_ns = parse_duration(dt)? * 1e9;
    }
    if let Some(p) = c.power_w {
        config.classical.power_w = p;
    }
    if let Some(path) = &c.power_log {
        config.classical.power_w = read_power_log(File::open(path)?)?;
    }
    Ok(())
}

fn load_model(source: &ModelSource) -> Result<CostModel> {
    match (&source.model, &source.timing) {
        (Some(path), _) => Ok(serde_json::from_reader(File::open(path)?)?),
        (None, Some(path)) => {
            let samples = read_timing_csv(File::open(path)?)?;
            fit_samples(&samples, source.method, &FitOptions::default(), None)
        }
        (None, None) => Err(Error::Config("either --timing or --model is required".into())),
    }
}

fn fit_samples(samples: &[RuntimeSample], method: MethodArg, options: &FitOptions, tag: Option<&str>) -> Result<CostModel> {
    let wanted = match method {
        MethodArg::Mps => Method::Mps,
        MethodArg::Nqs => Method::Nqs,
    };
    let selected: Vec<RuntimeSample> = samples
        .iter()
        .filter(|s| s.method() == wanted && tag.is_none_or(|t| s.hardware_tag == t))
        .cloned()
        .collect();
    Ok(match wanted {
        Method::Mps => CostModel::Mps(fit_mps(&selected, options)?),
        Method::Nqs => CostModel::Nqs(fit_nqs(&selected, options)?),
    })
}

fn estimate(ctx: &mut Ctx, what: &EstimateKind) -> Result<()> {
    match what {
        EstimateKind::Shots { qpu, register } => {
            apply_qpu(&mut ctx.config, qpu);
            let manifest = ctx.manifest("estimate shots")?;
            let n = match register {
                Some(r) => parse_register(r)?,
                None => ctx.config.lattice.lx * ctx.config.lattice.ly,
            };
            let m = shots_for_precision(ctx.config.qpu.p_observable, ctx.config.qpu.alpha)?;
            let summary = qpu_schedule(n, &ctx.config.qpu_settings())?.summary();
            let text = format!(
                "{m}\nusable shots {m}; defect-free probability {:.4} for {n} atoms; attempts {}; {}; {:.2} kWh\n",
                summary.p_defect_free,
                summary.n_attempts,
                format_duration(summary.wall_seconds),
                summary.energy_kwh
            );
            ctx.finish(manifest, "shots.json", serde_json::to_value(summary)?, || text)
        }
        EstimateKind::Qpu { qpu, register } => {
            apply_qpu(&mut ctx.config, qpu);
            let manifest = ctx.manifest("estimate qpu")?;
            let settings = ctx.config.qpu_settings();
            let mut schedules = Vec::new();
            let mut rows = Vec::new();
            for r in register {
                let n = parse_register(r)?;
                let s = qpu_schedule(n, &settings)?;
                rows.push(TableRow { size: r.clone(), method: "QPU".into(), memory_bytes: None, seconds: s.budget.wall_seconds, energy_kwh: s.energy_kwh });
                schedules.push(s);
            }
            let table = format_table(&rows);
            ctx.write_table(&table)?;
            ctx.finish(manifest, "qpu.json", serde_json::to_value(&schedules)?, || table)
        }
        EstimateKind::Classical { source, classical, size } => {
            apply_classical(&mut ctx.config, classical)?;
            let manifest = ctx.manifest("estimate classical")?;
            let model = load_model(source)?;
            let cs = ctx.config.classical_settings();
            let mut reports = Vec::new();
            let mut rows = Vec::new();
            for s in size {
                let n = parse_register(s)?;
                let r = extrapolate(&model, n, cs.chi, cs.t_pulse, cs.dt, cs.power_watts)?;
                rows.push(TableRow::classical(s.clone(), &r));
                reports.push(r);
            }
            let mut table = format_table(&rows);
            for w in reports.iter().flat_map(|r| &r.warnings) {
                table.push_str(&format!("warning: {w}\n"));
            }
            ctx.write_table(&table)?;
            ctx.finish(manifest, "classical.json", json!({ "model": model, "reports": reports }), || table)
        }
        EstimateKind::Crossover { source, classical, qpu, n_min, n_max, n_step } => {
            apply_classical(&mut ctx.config, classical)?;
            apply_qpu(&mut ctx.config, qpu);
            let manifest = ctx.manifest("estimate crossover")?;
            let model = load_model(source)?;
            if *n_step == 0 || n_min > n_max || *n_min == 0 {
                return Err(Error::Config("crossover grid needs 0 < n_min <= n_max and n_step > 0".into()));
            }
            let grid: Vec<usize> = (*n_min..=*n_max).step_by(*n_step).collect();
            let cs = ctx.config.classical_settings();
            let settings = ctx.config.qpu_settings();
            let res = crossover(
                &grid,
                |n| extrapolate(&model, n, effective_chi(n, cs.chi), cs.t_pulse, cs.dt, cs.power_watts).map(|r| (r.total_seconds, r.energy_kwh)),
                |n| qpu_schedule(n, &settings).map(|s| (s.budget.wall_seconds, s.energy_kwh)),
            )?;
            let show = |x: Option<f64>| x.map_or("NONE".to_string(), |v| format!("{v:.1}"));
            let text = format!("N*_time   {}\nN*_energy {}\n", show(res.n_time), show(res.n_energy));
            ctx.finish(manifest, "crossover.json", json!({ "n_star_time": res.n_time, "n_star_energy": res.n_energy, "points": res.points }), || text)
        }
    }
}

impl Ctx {
    fn write_table(&self, table: &str) -> Result<()> {
        if let Some(p) = self.out_path("table.txt")? {
            std::fs::write(p, table)?;
        }
        Ok(())
    }
}

fn rearrange(ctx: &mut Ctx, args: &RearrangeArgs) -> Result<()> {
    let r = &mut ctx.config.register;
    if let Some(t) = args.trials {
        r.trials = t;
    }
    if let Some(f) = args.fill_p {
        r.fill_p = f;
    }
    if let Some(l) = &args.layout {
        r.layout = Some(l.clone());
    }
    if args.perfect {
        let p = DefectProbabilities::PERFECT;
        (r.p_transf, r.p_pickup, r.p_acci, r.p_loss) = (p.p_transf, p.p_pickup, p.p_acci, p.p_loss);
    }
    let manifest = ctx.manifest("rearrange")?;
    let cfg = &ctx.config;
    let probs = cfg.probabilities();
    let layouts: Vec<TrapLayout> = match (&args.register, &cfg.register.layout) {
        (Some(sizes), None) => sizes
            .iter()
            .map(|&n| TrapLayout::grid_with_central_register(cfg.register.cols, cfg.register.rows, n, cfg.register.pitch_um))
            .collect::<Result<_>>()?,
        _ => vec![cfg.layout()?],
    };
    let mut results = Vec::new();
    let mut text = String::from("register  traps  p_hat      std_err    analytic   z\n");
    for layout in &layouts {
        let est = simulate_defect_free(layout, &probs, cfg.register.fill_p, cfg.register.trials, cfg.run.seed)?;
        let analytic = est.analytic_reference(layout, cfg.register.fill_p, &probs)?;
        let z = if est.std_err > 0.0 { (est.p_hat - analytic) / est.std_err } else { 0.0 };
        text.push_str(&format!(
            "{:<8}  {:<5}  {:<9.6}  {:<9.6}  {:<9.6}  {:+.2}\n",
            layout.n_register(),
            layout.n_traps(),
            est.p_hat,
            est.std_err,
            analytic,
            z
        ));
        results.push(json!({
            "n_register": layout.n_register(),
            "n_traps": layout.n_traps(),
            "p_hat": est.p_hat,
            "std_err": est.std_err,
            "trials": est.trials,
            "counts_mean": est.counts_mean,
            "feasible_fraction": est.feasible_fraction,
            "analytic": analytic,
        }));
    }
    ctx.finish(manifest, "rearrange.json", Value::Array(results), || text)
}

fn fit(ctx: &mut Ctx, kind: &FitKind) -> Result<()> {
    let (args, method) = match kind {
        FitKind::Mps(a) => (a, MethodArg::Mps),
        FitKind::Nqs(a) => (a, MethodArg::Nqs),
    };
    let manifest = ctx.manifest(if method == MethodArg::Mps { "fit mps" } else { "fit nqs" })?;
    let samples = read_timing_csv(File::open(&args.timing)?)?;
    let options = FitOptions { relative: !args.absolute, normalize_workers: !args.no_worker_normalization };
    let model = fit_samples(&samples, method, &options, args.hardware_tag.as_deref())?;
    if let Some(p) = ctx.out_path("model.json")? {
        write_json(&p, &model)?;
    }
    let text = model_text(&model, &args.timing);
    ctx.finish(manifest, "fit.json", serde_json::to_value(&model)?, || text)
}

fn model_text(model: &CostModel, source: &Path) -> String {
    match model {
        CostModel::Mps(m) => format!(
            "t(N, chi) = {:.4e} + {:.4e} N^1.5 chi^3 + {:.4e} N^2 chi^2  [s/step]\nfrom {} samples in {}; relative rms residual {:.3}\n",
            m.a,
            m.b,
            m.c,
            m.n_samples,
            source.display(),
            m.fit_residual
        ),
        CostModel::Nqs(m) => format!(
            "t(N) = {:.4e} N + {:.4e} N^2 + {:.4e} N^3  [device-s/step]\nfrom {} samples in {}; relative rms residual {:.3}\n",
            m.a_q,
            m.b_q,
            m.c_q,
            m.n_samples,
            source.display(),
            m.fit_residual
        ),
    }
}
