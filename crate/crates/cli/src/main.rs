//! `hems`: run simulations, parameter sweeps, bound checks and solver
//! verification from the command line.
//!
//! Exit status is 0 on success, 1 when an input fails validation and 2 when
//! a run fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use hems_core::config::validate_config;
use hems_core::metrics::{
    summarize, write_slots_csv, write_summary_json, write_sweep_csv, SweepRow,
};
use hems_core::params::{compute_performance_gap, derive_controller_params, ParamOverrides};
use hems_core::solver::{oracle_p2_refined, random_instance, solve_p2};
use hems_core::traces::{
    generate_ev_requests, load_ev_csv, load_trace_csv, synthetic_trace, write_ev_csv,
    write_trace_csv, EnergyRange, EvWindow,
};
use hems_core::{EvRequest, HomeConfig, Policy, PolicyKind, TraceBundle, ValidatedConfig};

#[derive(Parser)]
#[command(
    name = "hems",
    version,
    about = "Online home energy management simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Default)]
struct Overrides {
    /// Cost weight V (must not exceed the derived cap).
    #[arg(long = "v")]
    v: Option<f64>,
    /// Discomfort weight.
    #[arg(long)]
    gamma: Option<f64>,
    /// Thermal inertia factor.
    #[arg(long)]
    eps: Option<f64>,
    /// Comfort band minimum.
    #[arg(long)]
    t_min: Option<f64>,
}

#[derive(clap::Args)]
struct Inputs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// EV requests (`s,c,E`); no EV load when omitted.
    #[arg(long)]
    ev: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Proposed,
    P,
    B1,
    B2,
    B3,
}

impl From<PolicyArg> for PolicyKind {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Proposed | PolicyArg::P => PolicyKind::Proposed,
            PolicyArg::B1 => PolicyKind::B1,
            PolicyArg::B2 => PolicyKind::B2,
            PolicyArg::B3 => PolicyKind::B3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum SweepParam {
    Gamma,
    Eps,
    TMin,
    V,
}

impl SweepParam {
    fn name(&self) -> &'static str {
        match self {
            SweepParam::Gamma => "gamma",
            SweepParam::Eps => "eps",
            SweepParam::TMin => "t_min",
            SweepParam::V => "V",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy and write `slots.csv` and `summary.json`.
    Simulate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "proposed")]
        policy: PolicyArg,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run all four policies across one parameter axis and write `sweep.csv`.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the derived controller parameters and bounds as JSON.
    Check {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare the subproblem solver against a refined grid search.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long, default_value_t = 6)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded synthetic trace and, optionally, EV requests.
    GenTrace {
        #[arg(long, default_value_t = 31)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        ev_out: Option<PathBuf>,
        /// Hourly step counts the occupancy column was derived from.
        #[arg(long)]
        steps_out: Option<PathBuf>,
        /// Bounds to generate within; the reference home when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

type CliResult<T> = Result<T, Failure>;

trait Classify<T> {
    fn invalid(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CliResult<T> {
        self.map_err(|e| Failure::Validation(e.into()))
    }
    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Simulate {
            inputs,
            policy,
            out_dir,
            overrides,
        } => simulate(&inputs, policy.into(), &out_dir, &overrides),
        Command::Sweep {
            inputs,
            param,
            values,
            out_dir,
            overrides,
        } => sweep(&inputs, param, &values, &out_dir, &overrides),
        Command::Check { config, overrides } => check(&config, &overrides),
        Command::Oracle {
            samples,
            grid,
            rounds,
            seed,
        } => oracle(samples, grid, rounds, seed),
        Command::GenTrace {
            days,
            seed,
            out,
            ev_out,
            steps_out,
            config,
        } => gen_trace(
            days,
            seed,
            &out,
            ev_out.as_deref(),
            steps_out.as_deref(),
            config.as_deref(),
        ),
    }
}

fn load_config(path: &Path, ov: &Overrides) -> CliResult<ValidatedConfig> {
    let mut cfg = HomeConfig::load(path)
        .with_context(|| format!("config {}", path.display()))
        .invalid()?;
    apply_overrides(&mut cfg, ov);
    validate_config(cfg)
        .with_context(|| format!("config {}", path.display()))
        .invalid()
}

fn apply_overrides(cfg: &mut HomeConfig, ov: &Overrides) {
    if let Some(g) = ov.gamma {
        cfg.gamma = g;
    }
    if let Some(e) = ov.eps {
        cfg.epsilon = e;
    }
    if let Some(t) = ov.t_min {
        cfg.t_min = t;
    }
}

fn param_overrides(ov: &Overrides) -> ParamOverrides {
    ParamOverrides {
        v: ov.v,
        ..ParamOverrides::default()
    }
}

fn load_inputs(inputs: &Inputs, cfg: &HomeConfig) -> CliResult<(TraceBundle, Vec<EvRequest>)> {
    let trace = load_trace_csv(&inputs.trace, cfg)
        .with_context(|| format!("trace {}", inputs.trace.display()))
        .invalid()?;
    let ev = match &inputs.ev {
        Some(p) => load_ev_csv(p)
            .with_context(|| format!("EV requests {}", p.display()))
            .invalid()?,
        None => Vec::new(),
    };
    Ok((trace, ev))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .runtime()?;
    }
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .runtime()
}

fn simulate(inputs: &Inputs, kind: PolicyKind, out_dir: &Path, ov: &Overrides) -> CliResult<()> {
    let cfg = load_config(&inputs.config, ov)?;
    let (trace, ev) = load_inputs(inputs, &cfg)?;
    let policy = Policy::new(kind, &cfg, &param_overrides(ov)).invalid()?;
    let run = hems_core::run_simulation(&trace, &ev, &policy).runtime()?;
    let summary = summarize(&run).runtime()?;

    let slots = out_dir.join("slots.csv");
    write_slots_csv(&run, create(&slots)?)
        .with_context(|| format!("writing {}", slots.display()))
        .runtime()?;
    let path = out_dir.join("summary.json");
    write_summary_json(&summary, create(&path)?)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()?;
    write_summary_json(&summary, std::io::stdout().lock()).runtime()?;
    Ok(())
}

fn worker_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("HEMS_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder.build().runtime()
}

fn sweep(
    inputs: &Inputs,
    param: SweepParam,
    values: &[f64],
    out_dir: &Path,
    ov: &Overrides,
) -> CliResult<()> {
    let base = load_config(&inputs.config, ov)?;
    let (trace, ev) = load_inputs(inputs, &base)?;

    let mut points = Vec::with_capacity(values.len() * PolicyKind::ALL.len());
    for &value in values {
        let mut cfg = (*base).clone();
        let mut pov = param_overrides(ov);
        match param {
            SweepParam::Gamma => cfg.gamma = value,
            SweepParam::Eps => cfg.epsilon = value,
            SweepParam::TMin => cfg.t_min = value,
            SweepParam::V => pov.v = Some(value),
        }
        let cfg = validate_config(cfg)
            .with_context(|| format!("{} = {value}", param.name()))
            .invalid()?;
        trace
            .validate(&cfg)
            .with_context(|| format!("trace at {} = {value}", param.name()))
            .invalid()?;
        for kind in PolicyKind::ALL {
            let policy = Policy::new(kind, &cfg, &pov)
                .with_context(|| format!("{} = {value}, policy {}", param.name(), kind.name()))
                .invalid()?;
            points.push((value, policy));
        }
    }

    let pool = worker_pool()?;
    let results: Vec<CliResult<SweepRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|(value, policy)| {
                let run = hems_core::run_simulation(&trace, &ev, policy)
                    .with_context(|| {
                        format!("{} = {value}, policy {}", param.name(), policy.kind.name())
                    })
                    .runtime()?;
                Ok(SweepRow {
                    param: param.name().to_string(),
                    value: *value,
                    summary: summarize(&run).runtime()?,
                })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    let path = out_dir.join("sweep.csv");
    write_sweep_csv(&rows, create(&path)?)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn print_json(v: &serde_json::Value) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).runtime()?;
    writeln!(out).runtime()
}

fn check(config: &Path, ov: &Overrides) -> CliResult<()> {
    let cfg = load_config(config, ov)?;
    let (params, bounds) = derive_controller_params(&cfg, &param_overrides(ov)).invalid()?;
    let gap = compute_performance_gap(&cfg, &params);
    print_json(&json!({
        "V": params.v,
        "Gamma": params.gamma_shift,
        "alpha": params.alpha_shift,
        "xi": params.xi,
        "D_max": bounds.d_max,
        "params": params,
        "bounds": bounds,
        "gap": gap,
    }))
}

fn oracle(samples: usize, grid: usize, rounds: usize, seed: u64) -> CliResult<()> {
    if grid < 3 {
        return Err(Failure::Validation(anyhow!("--grid must be at least 3")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<_> = (0..samples).map(|_| random_instance(&mut rng)).collect();
    let pool = worker_pool()?;
    let gaps: Vec<Result<f64, String>> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                let d = solve_p2(inst).map_err(|e| e.to_string())?;
                let o = oracle_p2_refined(inst, grid, rounds);
                Ok((d.objective - o.objective) / (1.0 + o.objective.abs()))
            })
            .collect()
    });
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let mut failures = 0usize;
    for g in &gaps {
        match g {
            Ok(g) => {
                worst = worst.max(*g);
                if *g > 1e-6 {
                    violations += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    print_json(&json!({
        "samples": samples,
        "grid": grid,
        "rounds": rounds,
        "seed": seed,
        "max_relative_gap": if worst.is_finite() { json!(worst) } else { json!(null) },
        "violations": violations,
        "solver_failures": failures,
    }))?;
    if violations + failures > 0 {
        return Err(Failure::Runtime(anyhow!(
            "{violations} instances above tolerance, {failures} solver failures"
        )));
    }
    Ok(())
}

fn gen_trace(
    days: usize,
    seed: u64,
    out: &Path,
    ev_out: Option<&Path>,
    steps_out: Option<&Path>,
    config: Option<&Path>,
) -> CliResult<()> {
    if days == 0 {
        return Err(Failure::Validation(anyhow!("--days must be positive")));
    }
    let cfg = match config {
        Some(p) => load_config(p, &Overrides::default())?.into_inner(),
        None => HomeConfig::reference(),
    };
    let synth = synthetic_trace(&cfg, days, seed);
    write_trace_csv(&synth.bundle, create(out)?)
        .with_context(|| format!("writing {}", out.display()))
        .runtime()?;
    if let Some(p) = ev_out {
        let (reqs, _) = generate_ev_requests(
            seed,
            days,
            EvWindow::default(),
            EnergyRange::default(),
            &cfg,
        )
        .invalid()?;
        write_ev_csv(&reqs, create(p)?)
            .with_context(|| format!("writing {}", p.display()))
            .runtime()?;
    }
    if let Some(p) = steps_out {
        let mut w = create(p)?;
        writeln!(w, "t,steps").runtime()?;
        for (t, s) in synth.steps.iter().enumerate() {
            writeln!(w, "{t},{s}").runtime()?;
        }
        w.flush().runtime()?;
    }
    Ok(())
}
