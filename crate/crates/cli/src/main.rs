//! `qaprec`: run precoding sweeps, the K·L trade-off study, single solves and
//! quantizer designs from the command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 solver budget exhausted in at least
//! one trial (the report is still written), 4 I/O failure, 1 anything else.

mod args;
mod output;

use std::io::Write as _;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context as _;
use clap::Parser as _;

use qaprec::evaluation::{run_kl_tradeoff, run_sweep, RateReport, SweepConfig};
use qaprec::model::{generate_channel, RngSeed, SystemDims, SystemInstance};
use qaprec::precoders::{beta_wf, precoder_quantizer};
use qaprec::qap::{build_real_program, quantization_aware_precoder, SolveDump, SolveStatus, SolverConfig};
use qaprec::quantizer::{optimize_step_size, GaussianSource};

use args::{Cli, Command, Format, QuantizerArgs, SolveArgs, SweepArgs, TradeoffArgs};
use output::{write_atomic, OutputError};

const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER_BUDGET: u8 = 3;
const EXIT_IO: u8 = 4;

/// Errors carrying their exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(OutputError),
    Other(anyhow::Error),
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Io(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let outcome = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(Failure::Other(anyhow::anyhow!("cannot start {n} worker threads: {e}"))),
        },
        None => run(cli),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_SOLVER_BUDGET),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` when some solve ran out of budget.
fn run(cli: Cli) -> Result<bool, Failure> {
    let stamp = (!cli.no_timestamp).then(output::timestamp);
    match cli.command {
        Command::Sweep(args) => sweep(args, stamp.as_deref()),
        Command::Tradeoff(args) => tradeoff(args, stamp.as_deref()),
        Command::SolveOne(args) => solve_one(args),
        Command::QuantizerDesign(args) => quantizer_design(args),
    }
}

fn solver_config(gap_tol: f64, time_limit: Option<f64>) -> Result<SolverConfig, Failure> {
    let cfg = SolverConfig {
        gap_tolerance: gap_tol,
        time_limit: time_limit.map(Duration::from_secs_f64),
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| Failure::Usage(format!("--gap-tol: {e}")))?;
    Ok(cfg)
}

fn summarize(report: &RateReport) {
    for r in &report.rows {
        eprintln!(
            "{:<14} K={} L={} snr={:>6} dB  rate={:>8.4} ± {:.4}  trials={} failures={}",
            r.scheme.name(),
            r.users,
            r.levels,
            r.snr_db,
            r.mean_sumrate,
            r.std_err,
            r.trials,
            r.solver_failures
        );
    }
}

fn render(report: &RateReport, format: Format, stamp: Option<&str>) -> String {
    match format {
        Format::Csv => output::csv_with_stamp(report, stamp),
        Format::Json => output::json_with_stamp(report, stamp),
    }
}

fn sweep(args: SweepArgs, stamp: Option<&str>) -> Result<bool, Failure> {
    let resolved = args.resolve().map_err(Failure::Usage)?;
    let cfg = SweepConfig {
        dims: SystemDims::new(resolved.antennas, resolved.users).map_err(|e| Failure::Usage(e.to_string()))?,
        gamma: 1.0,
        snr_points_db: resolved.snr_db,
        levels: resolved.levels,
        trials: resolved.trials,
        seed: resolved.seed,
        schemes: resolved.schemes,
        solver: solver_config(resolved.gap_tol, resolved.time_limit)?,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    for w in cfg.dims.warnings() {
        eprintln!("warning: {w}");
    }
    let report = run_sweep(&cfg).context("sweep failed")?;
    summarize(&report);
    let body = render(&report, resolved.format, stamp);
    match &resolved.out {
        Some(path) => write_atomic(path, body.as_bytes())?,
        None => print_stdout(&body)?,
    }
    Ok(report.total_failures() == 0)
}

fn tradeoff(args: TradeoffArgs, stamp: Option<&str>) -> Result<bool, Failure> {
    let resolved = args.resolve().map_err(Failure::Usage)?;
    let solver = solver_config(resolved.gap_tol, resolved.time_limit)?;
    let mut cfgs = Vec::new();
    for &(k, l) in &resolved.pairs {
        let cfg = SweepConfig {
            dims: SystemDims::new(resolved.antennas, k).map_err(|e| Failure::Usage(e.to_string()))?,
            gamma: 1.0,
            snr_points_db: resolved.snr_db.clone(),
            levels: l,
            trials: resolved.trials,
            seed: resolved.seed,
            schemes: resolved.schemes.clone(),
            solver: solver.clone(),
        };
        cfg.validate().map_err(|e| Failure::Usage(format!("--kl {k}x{l}: {e}")))?;
        cfgs.push(cfg);
    }
    let reports = run_kl_tradeoff(&cfgs).context("trade-off failed")?;
    let mut ok = true;
    std::fs::create_dir_all(&resolved.out).map_err(|e| OutputError::new(&resolved.out, e))?;
    for report in &reports {
        summarize(report);
        let ext = match resolved.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = resolved.out.join(format!("kl_K{}_L{}.{ext}", report.users, report.levels));
        write_atomic(&path, render(report, resolved.format, stamp).as_bytes())?;
        ok &= report.total_failures() == 0;
    }
    Ok(ok)
}

fn solve_one(args: SolveArgs) -> Result<bool, Failure> {
    let dims = SystemDims::new(args.antennas, args.users).map_err(|e| Failure::Usage(e.to_string()))?;
    let channel = generate_channel(dims, 1.0, RngSeed::new(args.seed, args.trial)).context("channel draw")?;
    let inst = match args.snr_db {
        Some(snr) => SystemInstance::at_snr_db(channel, snr),
        None => SystemInstance::new(channel, args.power, 1.0, 1.0),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let spec = precoder_quantizer(&inst, args.levels).map_err(|e| Failure::Usage(e.to_string()))?;
    let solver = solver_config(args.gap_tol, args.time_limit)?;
    let aware = match quantization_aware_precoder(&inst, &spec, &solver) {
        Ok(aware) => aware,
        Err(qaprec::Error::Infeasible) => {
            return Err(Failure::Usage(format!(
                "no lattice point fits the power budget for K={} and L={}",
                args.users, args.levels
            )))
        }
        Err(e) => return Err(Failure::Other(e.into())),
    };
    let r = &aware.result;
    println!(
        "status={:?} objective={:.12} lower_bound={:.12} nodes={} relaxations={} time={:.3}s power={:.6}/{:.6}",
        r.status,
        r.objective,
        r.lower_bound,
        r.nodes_explored,
        r.relaxation_solves,
        r.wall_time.as_secs_f64(),
        aware.precoder.power(),
        inst.power()
    );
    if let Some(path) = &args.dump {
        let beta = beta_wf(&inst).context("beta")?;
        let prog = build_real_program(&inst, beta, &spec).context("program")?;
        let dump = SolveDump::new(&inst, aware.beta, &prog, r);
        write_atomic(path, (dump.to_json() + "\n").as_bytes())?;
    }
    Ok(r.status == SolveStatus::Optimal)
}

fn quantizer_design(args: QuantizerArgs) -> Result<bool, Failure> {
    let source = GaussianSource::new(args.variance).map_err(|e| Failure::Usage(format!("--variance: {e}")))?;
    let design = optimize_step_size(args.levels, source).map_err(|e| Failure::Usage(e.to_string()))?;
    let spec = qaprec::quantizer::make_quantizer(args.levels, design.delta).context("quantizer")?;
    let text = match args.format {
        Format::Json => {
            let doc = serde_json::json!({
                "levels": args.levels,
                "variance": args.variance,
                "delta": design.delta,
                "distortion": design.distortion,
                "labels": spec.labels(),
                "thresholds": spec.thresholds().iter().map(|t| if t.is_finite() { Some(*t) } else { None }).collect::<Vec<_>>(),
            });
            serde_json::to_string_pretty(&doc).context("json")? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("levels,variance,delta,distortion\n");
            s.push_str(&format!("{},{},{:.12},{:.12}\n", args.levels, args.variance, design.delta, design.distortion));
            s
        }
    };
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print_stdout(&text)?,
    }
    Ok(true)
}

fn print_stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Io(OutputError::new(std::path::Path::new("<stdout>"), e)))
}
