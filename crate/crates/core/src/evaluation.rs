//! Monte Carlo sum-rate evaluation of precoding schemes over SNR sweeps.
//!
//! Each trial draws one channel and evaluates every configured scheme on it at
//! every SNR point, so scheme comparisons are paired. SNR is set through the
//! power budget with `N0 = 1`: `q = SNR / gamma`.
//!
//! Rates use Gaussian signaling with interference treated as noise:
//! `sum_k log2(1 + |g_kk|^2 / (sum_{j != k} |g_kj|^2 + N0))` with `G = H P`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::ComplexMatrix;
use crate::model::{db_to_linear, generate_channel, RngSeed, SystemDims, SystemInstance};
use crate::precoders::{mrt_precoder, precoder_quantizer, quantization_unaware_precoder, wf_precoder};
use crate::qap::{quantization_aware_precoder, SolveStatus, SolverConfig, POWER_TOLERANCE};
use crate::quantizer::{optimize_step_size, GaussianSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeId {
    /// Exact lattice precoder for `beta = beta_WF`.
    AwareWfBeta,
    /// Wiener filter, quantized and rescaled.
    UnawareWf,
    /// MRT, quantized and rescaled.
    UnawareMrt,
    /// Unquantized Wiener filter.
    InfiniteWf,
    /// Unquantized MRT.
    InfiniteMrt,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [
        SchemeId::AwareWfBeta,
        SchemeId::UnawareWf,
        SchemeId::UnawareMrt,
        SchemeId::InfiniteWf,
        SchemeId::InfiniteMrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::AwareWfBeta => "aware-wf-beta",
            SchemeId::UnawareWf => "unaware-wf",
            SchemeId::UnawareMrt => "unaware-mrt",
            SchemeId::InfiniteWf => "infinite-wf",
            SchemeId::InfiniteMrt => "infinite-mrt",
        }
    }

    /// Whether the scheme puts its precoder on the quantizer lattice.
    pub fn is_quantized(self) -> bool {
        !matches!(self, SchemeId::InfiniteWf | SchemeId::InfiniteMrt)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| invalid(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub dims: SystemDims,
    /// Channel entry variance; `N0 = 1` and `q = SNR / gamma`.
    pub gamma: f64,
    pub snr_points_db: Vec<f64>,
    pub levels: usize,
    pub trials: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeId>,
    pub solver: SolverConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.snr_points_db.is_empty() {
            return Err(invalid("SNR list is empty"));
        }
        if let Some(bad) = self.snr_points_db.iter().find(|s| !s.is_finite()) {
            return Err(invalid(format!("SNR point {bad} is not finite")));
        }
        if self.levels < 2 {
            return Err(invalid(format!("quantizer needs at least 2 levels, got {}", self.levels)));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid("gamma must be positive"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("no schemes selected"));
        }
        if self.schemes.contains(&SchemeId::AwareWfBeta) && !aware_is_feasible(self.dims.users, self.levels)? {
            return Err(invalid(format!(
                "aware-wf-beta has no lattice point within the power budget for K={} and L={}",
                self.dims.users, self.levels
            )));
        }
        self.solver.validate()
    }

    fn instance(&self, channel: &ComplexMatrix, snr_db: f64) -> Result<SystemInstance> {
        SystemInstance::new(channel.clone(), db_to_linear(snr_db) / self.gamma, 1.0, self.gamma)
    }
}

/// Whether the quantization-aware program has any feasible point.
///
/// With the step designed for variance `q / (2M)`, the smallest lattice point
/// has power `2MK (delta/2)^2 = K delta_1^2 q / 4` for even `L` (where
/// `delta_1` is the unit-variance step) and zero for odd `L`, so feasibility
/// depends on `K` and `L` only.
pub fn aware_is_feasible(users: usize, levels: usize) -> Result<bool> {
    if levels % 2 == 1 {
        return Ok(true);
    }
    let unit = optimize_step_size(levels, GaussianSource::new(1.0)?)?.delta;
    Ok(users as f64 * unit * unit / 4.0 <= 1.0 + POWER_TOLERANCE)
}

/// Sum rate in bit/s/Hz with inter-user interference treated as noise.
pub fn sum_rate(inst: &SystemInstance, precoder: &ComplexMatrix) -> Result<f64> {
    let g = inst.channel().matmul(precoder)?;
    let k = inst.users();
    let mut total = 0.0;
    for user in 0..k {
        let signal = g.get(user, user).norm_sqr();
        let interference: f64 = (0..k).filter(|&j| j != user).map(|j| g.get(user, j).norm_sqr()).sum();
        let denominator = interference + inst.noise();
        total += if denominator == 0.0 {
            if signal == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (signal / denominator).ln_1p() / std::f64::consts::LN_2
        };
    }
    Ok(total)
}

/// Extremes of `||P||_F^2 / q` over the successful trials of one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAudit {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl PowerAudit {
    fn empty() -> Self {
        Self {
            min_ratio: f64::INFINITY,
            max_ratio: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, ratio: f64) {
        self.min_ratio = self.min_ratio.min(ratio);
        self.max_ratio = self.max_ratio.max(ratio);
    }
}

/// Aggregate of one (scheme, SNR) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub scheme: SchemeId,
    pub snr_db: f64,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "L")]
    pub levels: usize,
    pub mean_sumrate: f64,
    pub std_err: f64,
    /// Successful trials entering the mean.
    pub trials: usize,
    pub solver_failures: usize,
    /// Mean solver nodes over successful trials (0 for closed-form schemes).
    pub mean_nodes: f64,
    #[serde(skip)]
    pub power_audit: Option<PowerAudit>,
    /// Per-trial rate in trial order, `None` for failed trials.
    #[serde(skip)]
    pub per_trial: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub antennas: usize,
    pub users: usize,
    pub levels: usize,
    pub seed: u64,
    pub rows: Vec<RateRow>,
}

pub const CSV_HEADER: &str = "scheme,snr_db,K,L,mean_sumrate,std_err,trials,solver_failures,mean_nodes";

impl RateReport {
    pub fn row(&self, scheme: SchemeId, snr_db: f64) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.snr_db == snr_db)
    }

    /// Rows of one scheme in SNR order.
    pub fn curve(&self, scheme: SchemeId) -> Vec<&RateRow> {
        self.rows.iter().filter(|r| r.scheme == scheme).collect()
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.solver_failures).sum()
    }

    /// CSV body with the header line, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.12},{:.12},{},{},{:.3}",
                r.scheme, r.snr_db, r.users, r.levels, r.mean_sumrate, r.std_err, r.trials, r.solver_failures, r.mean_nodes
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Mean and standard error of paired differences `a - b` over trials where both succeeded.
pub fn paired_difference(a: &RateRow, b: &RateRow) -> Option<(f64, f64, usize)> {
    let diffs: Vec<f64> = a
        .per_trial
        .iter()
        .zip(&b.per_trial)
        .filter_map(|(x, y)| Some((*x)? - (*y)?))
        .collect();
    let (mean, se) = mean_and_std_err(&diffs)?;
    Some((mean, se, diffs.len()))
}

fn mean_and_std_err(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

/// Outcome of one scheme on one instance.
struct Evaluation {
    rate: f64,
    power_ratio: f64,
    nodes: u64,
}

fn evaluate(cfg: &SweepConfig, inst: &SystemInstance, scheme: SchemeId) -> Result<Evaluation> {
    let (precoder, nodes) = match scheme {
        SchemeId::InfiniteWf => (wf_precoder(inst)?.into_matrix(), 0),
        SchemeId::InfiniteMrt => (mrt_precoder(inst)?.into_matrix(), 0),
        SchemeId::UnawareWf | SchemeId::UnawareMrt => {
            let spec = precoder_quantizer(inst, cfg.levels)?;
            let w = if scheme == SchemeId::UnawareWf {
                wf_precoder(inst)?
            } else {
                mrt_precoder(inst)?
            };
            (quantization_unaware_precoder(inst, &spec, w.matrix())?.into_matrix(), 0)
        }
        SchemeId::AwareWfBeta => {
            let spec = precoder_quantizer(inst, cfg.levels)?;
            let aware = quantization_aware_precoder(inst, &spec, &cfg.solver)?;
            if aware.result.status != SolveStatus::Optimal {
                return Err(Error::InvalidParameter(format!(
                    "solver stopped with status {:?}",
                    aware.result.status
                )));
            }
            (aware.precoder.into_matrix(), aware.result.nodes_explored)
        }
    };
    Ok(Evaluation {
        rate: sum_rate(inst, &precoder)?,
        power_ratio: precoder.frobenius_norm_sq() / inst.power(),
        nodes,
    })
}

/// Runs every (trial, SNR, scheme) combination. Trials run in parallel on the
/// current rayon pool; aggregation follows trial order, so the report is
/// identical for any thread count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<RateReport> {
    cfg.validate()?;
    let snrs = &cfg.snr_points_db;
    // outcomes[trial][snr][scheme]
    let outcomes: Vec<Vec<Vec<Option<Evaluation>>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<_> {
            let channel = generate_channel(cfg.dims, cfg.gamma, RngSeed::new(cfg.seed, trial as u64))?;
            snrs.iter()
                .map(|&snr| {
                    let inst = cfg.instance(&channel, snr)?;
                    Ok(cfg.schemes.iter().map(|&s| evaluate(cfg, &inst, s).ok()).collect())
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(snrs.len() * cfg.schemes.len());
    for (si, &snr) in snrs.iter().enumerate() {
        for (ki, &scheme) in cfg.schemes.iter().enumerate() {
            let cells: Vec<Option<&Evaluation>> = outcomes.iter().map(|t| t[si][ki].as_ref()).collect();
            let rates: Vec<f64> = cells.iter().flatten().map(|e| e.rate).collect();
            let (mean, std_err) = mean_and_std_err(&rates).unwrap_or((f64::NAN, f64::NAN));
            let mut audit = PowerAudit::empty();
            let mut nodes = 0u64;
            for e in cells.iter().flatten() {
                audit.record(e.power_ratio);
                nodes += e.nodes;
            }
            rows.push(RateRow {
                scheme,
                snr_db: snr,
                users: cfg.dims.users,
                levels: cfg.levels,
                mean_sumrate: mean,
                std_err,
                trials: rates.len(),
                solver_failures: cfg.trials - rates.len(),
                mean_nodes: if rates.is_empty() { 0.0 } else { nodes as f64 / rates.len() as f64 },
                power_audit: (!rates.is_empty()).then_some(audit),
                per_trial: cells.iter().map(|c| c.map(|e| e.rate)).collect(),
            });
        }
    }
    Ok(RateReport {
        antennas: cfg.dims.antennas,
        users: cfg.dims.users,
        levels: cfg.levels,
        seed: cfg.seed,
        rows,
    })
}

/// One sweep per (K, L) configuration. All configurations must share the
/// antenna count, SNR grid and number of trials.
pub fn run_kl_tradeoff(cfgs: &[SweepConfig]) -> Result<Vec<RateReport>> {
    let Some(first) = cfgs.first() else {
        return Err(invalid("trade-off needs at least one configuration"));
    };
    for c in cfgs {
        if c.dims.antennas != first.dims.antennas || c.snr_points_db != first.snr_points_db || c.trials != first.trials {
            return Err(invalid("trade-off configurations must share antennas, SNR grid and trials"));
        }
    }
    cfgs.iter().map(run_sweep).collect()
}

/// Desk-scale reproduction recipes.
pub mod presets {
    use super::{SchemeId, SweepConfig};
    use crate::model::SystemDims;
    use crate::qap::SolverConfig;

    pub const SEED: u64 = 20261019;

    /// `start, start + step, ..., stop` (inclusive up to rounding).
    pub fn snr_grid(start: f64, step: f64, stop: f64) -> Vec<f64> {
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + step * i as f64).collect()
    }

    /// Sum rate versus SNR for every scheme: M=8, K=2, L=8, -10..30 dB, 200 trials.
    pub fn fig2_desk() -> SweepConfig {
        SweepConfig {
            dims: SystemDims { antennas: 8, users: 2 },
            gamma: 1.0,
            snr_points_db: snr_grid(-10.0, 5.0, 30.0),
            levels: 8,
            trials: 200,
            seed: SEED,
            schemes: SchemeId::ALL.to_vec(),
            solver: SolverConfig::default(),
        }
    }

    /// (K, L) pairs with K * L = 24 at M = 8.
    pub const FIG3_PAIRS: [(usize, usize); 3] = [(2, 12), (3, 8), (4, 6)];

    /// Quantization-aware sum rate for each (K, L) in [`FIG3_PAIRS`], -10..30 dB in 10 dB steps.
    pub fn fig3_desk() -> Vec<SweepConfig> {
        FIG3_PAIRS
            .iter()
            .map(|&(users, levels)| SweepConfig {
                dims: SystemDims { antennas: 8, users },
                levels,
                snr_points_db: snr_grid(-10.0, 10.0, 30.0),
                schemes: vec![SchemeId::AwareWfBeta],
                ..fig2_desk()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn diag_instance(g: f64) -> (SystemInstance, ComplexMatrix) {
        let h = ComplexMatrix::identity(2);
        let inst = SystemInstance::new(h, 2.0 * g * g, 1.0, 1.0).unwrap();
        let p = ComplexMatrix::identity(2).scale(Complex64::new(g, 0.0));
        (inst, p)
    }

    #[test]
    fn single_user_shannon_rate() {
        let q = 3.0;
        let inst = SystemInstance::new(ComplexMatrix::from_real(1, 1, &[1.0]).unwrap(), q, 1.0, 1.0).unwrap();
        let p = ComplexMatrix::from_real(1, 1, &[q.sqrt()]).unwrap();
        assert!((sum_rate(&inst, &p).unwrap() - (1.0 + q).log2()).abs() < 1e-14);
        assert_eq!(sum_rate(&inst, &ComplexMatrix::zeros(1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn interference_free_diagonal() {
        let (inst, p) = diag_instance(1.7);
        assert!((sum_rate(&inst, &p).unwrap() - 2.0 * (1.0 + 1.7f64 * 1.7).log2()).abs() < 1e-12);
    }

    #[test]
    fn preset_grids() {
        assert_eq!(presets::snr_grid(-10.0, 5.0, 30.0).len(), 9);
        assert_eq!(presets::snr_grid(0.0, 0.1, 0.3), vec![0.0, 0.1, 0.2, 0.30000000000000004]);
        for cfg in presets::fig3_desk() {
            assert_eq!(cfg.dims.users * cfg.levels, 24);
            cfg.validate().unwrap();
        }
        presets::fig2_desk().validate().unwrap();
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeId::ALL {
            assert_eq!(s.name().parse::<SchemeId>().unwrap(), s);
        }
        assert!("aware".parse::<SchemeId>().is_err());
    }

    #[test]
    fn feasibility_of_binary_quantizers() {
        assert!(aware_is_feasible(1, 2).unwrap());
        assert!(!aware_is_feasible(2, 2).unwrap());
        assert!(aware_is_feasible(4, 4).unwrap());
        assert!(!aware_is_feasible(5, 4).unwrap());
        assert!(aware_is_feasible(11, 8).unwrap());
        assert!(!aware_is_feasible(12, 8).unwrap());
        assert!(aware_is_feasible(40, 3).unwrap());
    }

    #[test]
    fn csv_has_fixed_header() {
        let cfg = SweepConfig {
            dims: SystemDims::new(2, 1).unwrap(),
            gamma: 1.0,
            snr_points_db: vec![0.0, 10.0],
            levels: 4,
            trials: 3,
            seed: 1,
            schemes: SchemeId::ALL.to_vec(),
            solver: SolverConfig::default(),
        };
        let report = run_sweep(&cfg).unwrap();
        let csv = report.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 2 * 5);
        assert_eq!(report.total_failures(), 0);
    }
}
