//! JSON dump of a solved instance for regression pinning.
//!
//! Schema `qaprec.solve-dump/1` (all matrices row-major):
//!
//! ```text
//! {
//!   "schema": "qaprec.solve-dump/1",
//!   "antennas": M, "users": K, "levels": L, "delta": Δ, "power": q, "noise": N0,
//!   "beta": [re, im],
//!   "channel": { "rows", "cols", "re": [...], "im": [...] },
//!   "v_r": [[...], ...],            // 2MK x 2MK quadratic term
//!   "c_r": [...],                   // linear term
//!   "solution": {
//!     "status": "optimal" | "time-limit-incumbent" | "infeasible",
//!     "objective", "lower_bound",   // null when infeasible
//!     "x": [...], "a_r": [...],     // lattice indices and labels, empty when infeasible
//!     "nodes_explored", "relaxation_solves", "wall_time_s"
//!   },
//!   "incumbent_trace": [{ "node", "objective" }, ...]
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::program::RealQuadraticProgram;
use super::{IncumbentUpdate, SolveResult, SolveStatus};
use crate::error::Result;
use crate::matrix::{ComplexMatrix, ComplexMatrixDoc};
use crate::model::SystemInstance;
use crate::precoders::Beta;

pub const SOLVE_DUMP_SCHEMA: &str = "qaprec.solve-dump/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDoc {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub lower_bound: Option<f64>,
    pub x: Vec<usize>,
    pub a_r: Vec<f64>,
    pub nodes_explored: u64,
    pub relaxation_solves: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDump {
    pub schema: String,
    pub antennas: usize,
    pub users: usize,
    pub levels: usize,
    pub delta: f64,
    pub power: f64,
    pub noise: f64,
    pub beta: [f64; 2],
    pub channel: ComplexMatrixDoc,
    pub v_r: Vec<Vec<f64>>,
    pub c_r: Vec<f64>,
    pub solution: SolutionDoc,
    pub incumbent_trace: Vec<IncumbentUpdate>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl SolveDump {
    pub fn new(inst: &SystemInstance, beta: Beta, prog: &RealQuadraticProgram, result: &SolveResult) -> Self {
        let v = prog.quadratic();
        let (x, a_r) = match &result.point {
            Some(p) => (p.x.clone(), p.a.clone()),
            None => (Vec::new(), Vec::new()),
        };
        Self {
            schema: SOLVE_DUMP_SCHEMA.to_string(),
            antennas: inst.antennas(),
            users: inst.users(),
            levels: prog.levels(),
            delta: prog.delta(),
            power: prog.power(),
            noise: inst.noise(),
            beta: [beta.value().re, beta.value().im],
            channel: ComplexMatrixDoc::from(inst.channel()),
            v_r: (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect(),
            c_r: prog.linear().iter().copied().collect(),
            solution: SolutionDoc {
                status: result.status,
                objective: finite(result.objective),
                lower_bound: finite(result.lower_bound),
                x,
                a_r,
                nodes_explored: result.nodes_explored,
                relaxation_solves: result.relaxation_solves,
                wall_time_s: result.wall_time.as_secs_f64(),
            },
            incumbent_trace: result.incumbent_trace.clone(),
        }
    }

    pub fn channel_matrix(&self) -> Result<ComplexMatrix> {
        ComplexMatrix::try_from(&self.channel)
    }

    /// Rebuilds the program stored in the dump.
    pub fn program(&self) -> Result<RealQuadraticProgram> {
        let n = self.c_r.len();
        let v = nalgebra::DMatrix::from_fn(n, n, |i, j| self.v_r.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN));
        RealQuadraticProgram::new(v, nalgebra::DVector::from_vec(self.c_r.clone()), self.power, self.delta, self.levels)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump is always serializable")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
