//! `qanneal`: command-line driver for the annealing analysis toolkit.
//!
//! Every invocation resolves to a flat [`config::ExperimentConfig`], whose
//! hash is stamped into each output file; `run --config` replays a saved
//! config and reproduces the artifacts byte for byte. Exit codes: 0 on
//! success, 1 with an error JSON on stderr when a computation fails, 2 on
//! usage errors.

// `!(x > 0.0)` guards reject NaN from the command line along with
// out-of-range values; `x <= 0.0` would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

mod commands;
mod config;
mod output;

use commands::CmdError;
use config::{load_config, resolve, ExperimentConfig, UsageError};

#[derive(Parser)]
#[command(
    name = "qanneal",
    version,
    about = "Spectral gaps, optimized schedules, and run-time studies for \
             rank-one-driver quantum annealing"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

/// Flags shared across subcommands; which ones apply is checked per
/// command after parsing, so irrelevant flags are rejected with a
/// message naming the command.
#[derive(Args, Default)]
struct CommonOpts {
    /// Cost model: sat3, three-spin, or grover
    #[arg(long)]
    model: Option<String>,
    /// Number of spins
    #[arg(long)]
    n: Option<u32>,
    /// Clause count (sat3); overrides --alpha
    #[arg(long)]
    m: Option<usize>,
    /// Clause density; m = round(alpha n)
    #[arg(long)]
    alpha: Option<f64>,
    /// Master seed; child seeds split off a counter
    #[arg(long)]
    seed: Option<u64>,
    /// Relative accuracy of the closed-form gap
    #[arg(long)]
    delta: Option<f64>,
    /// Grid resolution (scan points or schedule nodes)
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads; 0 or absent picks the default
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default qanneal-out)
    #[arg(long)]
    out: Option<String>,
    /// Named parameter bundle; explicit flags win over it
    #[arg(long)]
    preset: Option<String>,
    /// Skip to the first child seed whose instance is solvable
    #[arg(long)]
    require_sat: bool,
    /// Analyze the first instance even if it has no solutions
    #[arg(long)]
    allow_unsat: bool,
    /// Instances or samples per size
    #[arg(long)]
    count: Option<usize>,
    /// Total annealing time
    #[arg(long = "t")]
    t_total: Option<f64>,
    /// Trajectory sampling intervals during evolve (rows = value + 1)
    #[arg(long)]
    log_points: Option<usize>,
    /// Success probability defining T*
    #[arg(long)]
    target_p: Option<f64>,
    /// Give up on T* beyond this time
    #[arg(long)]
    t_cap: Option<f64>,
    /// Error budget for the adiabatic-theorem bound
    #[arg(long)]
    epsilon: Option<f64>,
    /// Smallest size of a sweep
    #[arg(long)]
    n_min: Option<u32>,
    /// Largest size of a sweep
    #[arg(long)]
    n_max: Option<u32>,
    /// Size increment of a sweep
    #[arg(long)]
    n_step: Option<u32>,
}

#[derive(Args)]
struct RunOpts {
    /// Saved config (bare or as written next to earlier artifacts)
    #[arg(long)]
    config: PathBuf,
    /// Redirect the artifacts; bytes are unaffected
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for this replay
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one problem instance and save it
    Gen(CommonOpts),
    /// Density of states of a (generated) instance
    Dos(CommonOpts),
    /// Exact and closed-form gap across z
    GapScan(CommonOpts),
    /// Minimum gap, stopping point, detection ratio
    MinGap(CommonOpts),
    /// Locally optimized annealing schedule
    Schedule(CommonOpts),
    /// Adiabatic-theorem and algebraic run-time bounds
    Bounds(CommonOpts),
    /// Integrate the Schrodinger equation along the schedule
    Evolve(CommonOpts),
    /// Smallest annealing time reaching a target success probability
    Tstar(CommonOpts),
    /// Transverse-field minimum-gap statistics over random instances
    Transverse(CommonOpts),
    /// Moments of the random 3-SAT density of states
    Satstats(CommonOpts),
    /// Sampled large-n gap curves: isolated, far-flung minima
    Fig1(CommonOpts),
    /// Transverse-field batch at the fig2 protocol sizes
    Fig2(CommonOpts),
    /// Gap accuracy scan at the fig3 reference parameters
    Fig3(CommonOpts),
    /// Covariance check against direct sampling (fig15 protocol)
    Fig15(CommonOpts),
    /// Variance scaling of the partition sums across sizes
    Fig16b(CommonOpts),
    /// Replay a saved config
    Run(RunOpts),
}

fn opts_to_config(command: &str, o: &CommonOpts) -> Result<ExperimentConfig, UsageError> {
    let mut cfg = ExperimentConfig::new(command);
    cfg.model = o.model.clone();
    cfg.n = o.n;
    cfg.m = o.m;
    cfg.alpha = o.alpha;
    cfg.seed = o.seed;
    cfg.delta = o.delta;
    cfg.grid = o.grid;
    cfg.jobs = o.jobs;
    cfg.out = o.out.clone();
    cfg.preset = o.preset.clone();
    cfg.require_sat = match (o.require_sat, o.allow_unsat) {
        (true, true) => {
            return Err(UsageError(
                "--require-sat and --allow-unsat contradict each other".into(),
            ))
        }
        (true, false) => Some(true),
        (false, true) => Some(false),
        (false, false) => None,
    };
    cfg.count = o.count;
    cfg.t_total = o.t_total;
    cfg.log_points = o.log_points;
    cfg.target_p = o.target_p;
    cfg.t_cap = o.t_cap;
    cfg.epsilon = o.epsilon;
    cfg.n_min = o.n_min;
    cfg.n_max = o.n_max;
    cfg.n_step = o.n_step;
    Ok(cfg)
}

/// The fig aliases pin a preset on the underlying command.
fn alias_config(
    command: &str,
    preset: &str,
    o: &CommonOpts,
) -> Result<ExperimentConfig, UsageError> {
    if let Some(p) = &o.preset {
        if p != preset {
            return Err(UsageError(format!(
                "this alias fixes the preset to {preset:?}; drop --preset {p:?}"
            )));
        }
    }
    let mut cfg = opts_to_config(command, o)?;
    cfg.preset = Some(preset.to_string());
    Ok(cfg)
}

fn build_config(cmd: &Command) -> Result<ExperimentConfig, UsageError> {
    match cmd {
        Command::Gen(o) => opts_to_config("gen", o),
        Command::Dos(o) => opts_to_config("dos", o),
        Command::GapScan(o) => opts_to_config("gap-scan", o),
        Command::MinGap(o) => opts_to_config("min-gap", o),
        Command::Schedule(o) => opts_to_config("schedule", o),
        Command::Bounds(o) => opts_to_config("bounds", o),
        Command::Evolve(o) => opts_to_config("evolve", o),
        Command::Tstar(o) => opts_to_config("tstar", o),
        Command::Transverse(o) => opts_to_config("transverse", o),
        Command::Satstats(o) => opts_to_config("satstats", o),
        Command::Fig1(o) => opts_to_config("fig1", o),
        Command::Fig2(o) => alias_config("transverse", "fig2", o),
        Command::Fig3(o) => alias_config("gap-scan", "reproduce-fig3", o),
        Command::Fig15(o) => alias_config("satstats", "n15", o),
        Command::Fig16b(o) => opts_to_config("fig16b", o),
        Command::Run(o) => {
            let mut cfg = load_config(&o.config)?;
            if let Some(out) = &o.out {
                cfg.out = Some(out.clone());
            }
            if o.jobs.is_some() {
                cfg.jobs = o.jobs;
            }
            Ok(cfg)
        }
    }
}

fn drive(cli: &Cli) -> Result<(), CmdError> {
    let cfg = resolve(build_config(&cli.cmd)?)?;
    match cfg.jobs {
        Some(j) if j > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| {
                CmdError::Usage(UsageError(format!("cannot build a {j}-thread pool: {e}")))
            })?
            .install(|| commands::run(&cfg)),
        _ => commands::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match drive(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CmdError::Usage(e)) => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            let doc = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{doc}");
            ExitCode::from(1)
        }
    }
}
