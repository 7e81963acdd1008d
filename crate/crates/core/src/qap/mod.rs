//! Quantization-aware precoding as a bounded-integer convex quadratic program.
//!
//! [`build_real_program`] turns an instance, a fixed receiver scaling and the
//! quantizer lattice into a [`RealQuadraticProgram`]. Two exact solvers are
//! provided:
//!
//! * [`branch_and_bound`]: branch-and-bound over the integer box with
//!   accelerated projected gradient relaxations, most-fractional branching and a
//!   round/repair/polish incumbent heuristic.
//! * [`decomposed_search`]: Lagrangian decomposition of the power constraint.
//!   The quadratic term of a precoding program is block diagonal (one block per
//!   user stream), so for a fixed multiplier the problem splits into independent
//!   box-constrained integer least-squares problems, each enumerated with a
//!   Schnorr-Euchner search. Candidate lists are combined exactly under the
//!   shared power budget.
//!
//! [`brute_force_solve`] enumerates every lattice point and serves as the oracle.

mod brute;
mod bnb;
mod decomposition;
mod dump;
mod enumeration;
mod heuristics;
mod program;
mod projection;
mod relaxation;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemInstance;
use crate::precoders::{beta_opt, beta_wf, Alphabet, Beta, PrecoderMatrix};
use crate::quantizer::QuantizerSpec;

pub use bnb::branch_and_bound;
pub use brute::{brute_force_solve, BRUTE_FORCE_LIMIT};
pub use decomposition::decomposed_search;
pub use dump::{SolveDump, SOLVE_DUMP_SCHEMA};
pub use program::{
    build_real_program, embed_precoder, reshape_precoder, trace_objective, vector_objective, LatticePoint,
    RealQuadraticProgram, POWER_TOLERANCE,
};
pub use projection::{project_box_ball, BoxBall};
pub use relaxation::{gradient_lipschitz, solve_relaxation, Relaxation};

/// Which exact algorithm [`solve`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStrategy {
    /// Lagrangian decomposition with per-block enumeration.
    #[default]
    Decomposition,
    /// Relaxation-based branch-and-bound.
    RelaxationBnb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NodeSelection {
    #[default]
    BestFirst,
    DepthFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    #[default]
    MostFractional,
}

/// Solver knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub strategy: SolverStrategy,
    /// Absolute optimality gap in objective units.
    pub gap_tolerance: f64,
    pub time_limit: Option<Duration>,
    /// Search-node budget; exhausting it ends the solve like the time limit does.
    pub node_limit: Option<u64>,
    pub node_selection: NodeSelection,
    pub branching: Branching,
    pub relaxation_max_iterations: usize,
    pub relaxation_tolerance: f64,
    /// Best-first search falls back to depth-first while more nodes than this are open.
    pub max_open_nodes: usize,
    /// Re-solve once with `beta_opt` of the first solution.
    pub reoptimize_beta: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            strategy: SolverStrategy::Decomposition,
            gap_tolerance: 1e-9,
            time_limit: None,
            node_limit: None,
            node_selection: NodeSelection::BestFirst,
            branching: Branching::MostFractional,
            relaxation_max_iterations: 2_000,
            relaxation_tolerance: 1e-10,
            max_open_nodes: 200_000,
            reoptimize_beta: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tolerance > 0.0 && self.gap_tolerance.is_finite()) {
            return Err(Error::InvalidParameter("gap tolerance must be positive".into()));
        }
        if !(self.relaxation_tolerance > 0.0 && self.relaxation_tolerance.is_finite()) {
            return Err(Error::InvalidParameter("relaxation tolerance must be positive".into()));
        }
        if self.relaxation_max_iterations == 0 {
            return Err(Error::InvalidParameter("relaxation needs at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    /// Time or node budget exhausted; the point is the best one found.
    TimeLimitIncumbent,
    Infeasible,
}

/// An improvement of the incumbent during the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncumbentUpdate {
    pub node: u64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// `None` only when infeasible.
    pub point: Option<LatticePoint>,
    /// `a^T V a - 2 c^T a` at the point, `+inf` when infeasible.
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub lower_bound: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub relaxation_solves: u64,
    pub wall_time: Duration,
    pub incumbent_trace: Vec<IncumbentUpdate>,
}

impl SolveResult {
    pub(crate) fn infeasible(started: Instant) -> Self {
        Self {
            point: None,
            objective: f64::INFINITY,
            lower_bound: f64::INFINITY,
            status: SolveStatus::Infeasible,
            nodes_explored: 0,
            relaxation_solves: 0,
            wall_time: started.elapsed(),
            incumbent_trace: Vec::new(),
        }
    }
}

/// Search budget shared by the solvers.
pub(crate) struct Budget {
    deadline: Option<Instant>,
    node_limit: Option<u64>,
    pub nodes: u64,
}

pub(crate) struct Exhausted;

impl Budget {
    pub(crate) fn new(cfg: &SolverConfig, started: Instant) -> Self {
        Self {
            deadline: cfg.time_limit.map(|d| started + d),
            node_limit: cfg.node_limit,
            nodes: 0,
        }
    }

    #[inline]
    pub(crate) fn tick(&mut self) -> std::result::Result<(), Exhausted> {
        self.nodes += 1;
        if self.node_limit.is_some_and(|l| self.nodes > l) {
            return Err(Exhausted);
        }
        if self.nodes & 0x3ff == 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Exhausted);
        }
        Ok(())
    }
}

/// Runs the solver selected by `cfg.strategy`.
pub fn solve(prog: &RealQuadraticProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    match cfg.strategy {
        SolverStrategy::Decomposition => decomposed_search(prog, cfg),
        SolverStrategy::RelaxationBnb => branch_and_bound(prog, cfg),
    }
}

/// Outcome of [`quantization_aware_precoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct AwarePrecoder {
    pub precoder: PrecoderMatrix,
    pub beta: Beta,
    pub result: SolveResult,
}

/// Minimum-MSE precoder on the quantizer lattice for `beta = beta_WF`.
///
/// The returned precoder is not rescaled: its entries are lattice labels and its
/// power is at most `q`. Fails with [`Error::Infeasible`] when no lattice point
/// fits the power budget.
pub fn quantization_aware_precoder(
    inst: &SystemInstance,
    spec: &QuantizerSpec,
    cfg: &SolverConfig,
) -> Result<AwarePrecoder> {
    cfg.validate()?;
    let beta = beta_wf(inst)?;
    let first = solve_for_beta(inst, spec, cfg, beta)?;
    if !cfg.reoptimize_beta {
        return Ok(first);
    }
    let refined_beta = beta_opt(inst, first.precoder.matrix())?;
    if refined_beta.value().norm_sqr() == 0.0 {
        return Ok(first);
    }
    let second = solve_for_beta(inst, spec, cfg, refined_beta)?;
    let mse = |p: &AwarePrecoder| -> Result<f64> {
        let b = beta_opt(inst, p.precoder.matrix())?;
        crate::model::mse_closed_form(inst, p.precoder.matrix(), b.value())
    };
    if mse(&second)? < mse(&first)? {
        Ok(second)
    } else {
        Ok(first)
    }
}

fn solve_for_beta(inst: &SystemInstance, spec: &QuantizerSpec, cfg: &SolverConfig, beta: Beta) -> Result<AwarePrecoder> {
    let prog = build_real_program(inst, beta, spec)?;
    let result = solve(&prog, cfg)?;
    let point = result.point.as_ref().ok_or(Error::Infeasible)?;
    let matrix = reshape_precoder(&point.a, inst.antennas(), inst.users())?;
    let precoder = PrecoderMatrix::new(
        matrix,
        Alphabet::ScaledLattice {
            delta: spec.delta(),
            levels: spec.levels(),
            alpha: 1.0,
        },
    );
    Ok(AwarePrecoder { precoder, beta, result })
}
