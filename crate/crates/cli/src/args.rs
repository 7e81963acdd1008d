//! Command-line surface. Presets fill in whatever the explicit flags leave unset.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qaprec::evaluation::presets;
use qaprec::SchemeId;

#[derive(Debug, Parser)]
#[command(name = "qaprec", version, about = "Quantization-aware MU-MIMO precoding over a limited fronthaul")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for Monte Carlo trials (default: all cores).
    #[arg(long, global = true, value_parser = parse_positive)]
    pub threads: Option<usize>,
    /// Omit the generation-time header so reruns are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average sum rate versus SNR for a set of schemes.
    Sweep(SweepArgs),
    /// Sum rate versus SNR for several (K, L) pairs, one report per pair.
    Tradeoff(TradeoffArgs),
    /// Solve one quantization-aware precoding problem and report the solver outcome.
    SolveOne(SolveArgs),
    /// Optimal uniform quantizer step for a Gaussian source.
    QuantizerDesign(QuantizerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepPreset {
    /// M=8, K=2, L=8, -10..30 dB in 5 dB steps, 200 trials, every scheme.
    Fig2Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TradeoffPreset {
    /// M=8, (K, L) in {2x12, 3x8, 4x6}, -10..30 dB in 10 dB steps, 200 trials, aware scheme.
    Fig3Desk,
}

fn parse_levels(s: &str) -> Result<usize, String> {
    let l: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if l < 2 {
        return Err(format!("a quantizer needs at least 2 levels, got {l}"));
    }
    Ok(l)
}

fn parse_positive(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if n == 0 {
        return Err("must be at least 1".into());
    }
    Ok(n)
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !(x.is_finite() && x > 0.0) {
        return Err(format!("must be positive and finite, got {s}"));
    }
    Ok(x)
}

/// `start:step:stop` (inclusive) or a comma-separated list, in dB.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>, String> {
    let number = |t: &str| -> Result<f64, String> {
        let x: f64 = t.trim().parse().map_err(|_| format!("`{t}` is not a number"))?;
        if !x.is_finite() {
            return Err(format!("SNR must be finite, got {t}"));
        }
        Ok(x)
    };
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (number(start)?, number(step)?, number(stop)?);
            if step <= 0.0 || stop < start {
                return Err("range must be start:step:stop with step > 0 and stop >= start".into());
            }
            if (stop - start) / step > 10_000.0 {
                return Err("range has more than 10000 points".into());
            }
            presets::snr_grid(start, step, stop)
        }
        [list] => list.split(',').map(number).collect::<Result<_, _>>()?,
        _ => return Err(format!("`{s}` is neither start:step:stop nor a comma list")),
    };
    if grid.is_empty() {
        return Err("empty SNR grid".into());
    }
    Ok(grid)
}

fn parse_schemes(s: &str) -> Result<Vec<SchemeId>, String> {
    let mut out = Vec::new();
    for name in s.split(',') {
        let id: SchemeId = name.trim().parse().map_err(|e| format!("{e}"))?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    Ok(out)
}

/// `KxL` pairs separated by commas, e.g. `2x12,3x8,4x6`.
pub fn parse_kl(s: &str) -> Result<Vec<(usize, usize)>, String> {
    s.split(',')
        .map(|pair| {
            let (k, l) = pair
                .trim()
                .split_once(['x', 'X'])
                .ok_or_else(|| format!("`{pair}` is not of the form KxL"))?;
            Ok((parse_positive(k)?, parse_levels(l)?))
        })
        .collect()
}

/// Flags shared by the rate-producing subcommands.
#[derive(Debug, Args)]
pub struct CommonRun {
    /// Base-station antennas M.
    #[arg(short = 'M', long, value_parser = parse_positive)]
    pub antennas: Option<usize>,
    /// SNR grid in dB: `start:step:stop` or `a,b,c`.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<String>,
    /// Monte Carlo channel draws per SNR point.
    #[arg(long, value_parser = parse_positive)]
    pub trials: Option<usize>,
    /// Master seed; trial t uses the stream derived from (seed, t).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated schemes: aware-wf-beta, unaware-wf, unaware-mrt, infinite-wf, infinite-mrt.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Relative optimality gap at which the exact solver stops.
    #[arg(long, default_value_t = 1e-9)]
    pub gap_tol: f64,
    /// Wall-clock limit per exact solve, in seconds.
    #[arg(long, value_parser = parse_positive_f64)]
    pub time_limit: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub preset: Option<SweepPreset>,
    /// Users K.
    #[arg(short = 'K', long, value_parser = parse_positive)]
    pub users: Option<usize>,
    /// Quantizer levels L per real dimension.
    #[arg(short = 'L', long, value_parser = parse_levels)]
    pub levels: Option<usize>,
    #[command(flatten)]
    pub run: CommonRun,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct ResolvedSweep {
    pub antennas: usize,
    pub users: usize,
    pub levels: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeId>,
    pub gap_tol: f64,
    pub time_limit: Option<f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl SweepArgs {
    pub fn resolve(self) -> Result<ResolvedSweep, String> {
        // Without a preset the desk-scale figure configuration is still the baseline.
        let base = match self.preset {
            Some(SweepPreset::Fig2Desk) | None => presets::fig2_desk(),
        };
        let run = self.run;
        Ok(ResolvedSweep {
            antennas: run.antennas.unwrap_or(base.dims.antennas),
            users: self.users.unwrap_or(base.dims.users),
            levels: self.levels.unwrap_or(base.levels),
            snr_db: match &run.snr_db {
                Some(s) => parse_snr_grid(s).map_err(|e| format!("--snr-db: {e}"))?,
                None => base.snr_points_db,
            },
            trials: run.trials.unwrap_or(base.trials),
            seed: run.seed.unwrap_or(base.seed),
            schemes: match &run.schemes {
                Some(s) => parse_schemes(s).map_err(|e| format!("--schemes: {e}"))?,
                None => base.schemes,
            },
            gap_tol: run.gap_tol,
            time_limit: run.time_limit,
            format: run.format,
            out: self.out,
        })
    }
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[arg(long, value_enum)]
    pub preset: Option<TradeoffPreset>,
    /// (K, L) pairs, e.g. `2x12,3x8,4x6`.
    #[arg(long)]
    pub kl: Option<String>,
    #[command(flatten)]
    pub run: CommonRun,
    /// Output directory; one file `kl_K{K}_L{L}.{csv,json}` per pair.
    #[arg(long)]
    pub out: PathBuf,
}

pub struct ResolvedTradeoff {
    pub pairs: Vec<(usize, usize)>,
    pub antennas: usize,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeId>,
    pub gap_tol: f64,
    pub time_limit: Option<f64>,
    pub format: Format,
    pub out: PathBuf,
}

impl TradeoffArgs {
    pub fn resolve(self) -> Result<ResolvedTradeoff, String> {
        let base = match self.preset {
            Some(TradeoffPreset::Fig3Desk) | None => presets::fig3_desk(),
        };
        let first = &base[0];
        let run = self.run;
        Ok(ResolvedTradeoff {
            pairs: match &self.kl {
                Some(s) => parse_kl(s).map_err(|e| format!("--kl: {e}"))?,
                None => presets::FIG3_PAIRS.to_vec(),
            },
            antennas: run.antennas.unwrap_or(first.dims.antennas),
            snr_db: match &run.snr_db {
                Some(s) => parse_snr_grid(s).map_err(|e| format!("--snr-db: {e}"))?,
                None => first.snr_points_db.clone(),
            },
            trials: run.trials.unwrap_or(first.trials),
            seed: run.seed.unwrap_or(first.seed),
            schemes: match &run.schemes {
                Some(s) => parse_schemes(s).map_err(|e| format!("--schemes: {e}"))?,
                None => first.schemes.clone(),
            },
            gap_tol: run.gap_tol,
            time_limit: run.time_limit,
            format: run.format,
            out: self.out,
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(short = 'M', long, value_parser = parse_positive, default_value_t = 4)]
    pub antennas: usize,
    #[arg(short = 'K', long, value_parser = parse_positive, default_value_t = 2)]
    pub users: usize,
    #[arg(short = 'L', long, value_parser = parse_levels, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Which trial stream of `--seed` to draw the channel from.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    /// Operating SNR in dB (sets q = SNR with unit noise); overrides --power.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Transmit power q with unit noise, used when --snr-db is absent.
    #[arg(long, value_parser = parse_positive_f64, default_value_t = 1.0)]
    pub power: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub gap_tol: f64,
    #[arg(long, value_parser = parse_positive_f64)]
    pub time_limit: Option<f64>,
    /// Write the instance, program and solution as JSON.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizerArgs {
    #[arg(short = 'L', long, value_parser = parse_levels)]
    pub levels: usize,
    /// Variance of the Gaussian source.
    #[arg(long, value_parser = parse_positive_f64, default_value_t = 1.0)]
    pub variance: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
