//! Exact search by Lagrangian decomposition of the power constraint.
//!
//! With a multiplier `lambda >= 0` on `||a||^2 <= q`, the Lagrangian
//! `a^T (V + lambda I) a - 2 c^T a - lambda q` separates over the connected
//! blocks of `V`. Each block is a box-constrained integer least-squares problem
//! solved by [`BlockSearch`]. The dual value is a lower bound; it is maximized
//! by bisection on the sign of the power excess.
//!
//! Closing the duality gap: any feasible point better than the incumbent has a
//! total Lagrangian slack (sum over blocks of the distance above the block
//! minimum) below `incumbent - bound`. Per-block candidate lists within that
//! slack are enumerated, reduced to their (objective, norm) Pareto fronts and
//! merged block by block under the shared power budget.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::enumeration::{BlockSearch, Visit};
use super::heuristics::incumbent_from;
use super::program::{LatticePoint, RealQuadraticProgram, POWER_TOLERANCE};
use super::projection::BoxBall;
use super::relaxation::Relaxer;
use super::{Budget, Exhausted, IncumbentUpdate, SolveResult, SolveStatus, SolverConfig};
use crate::error::Result;

const BISECTION_STEPS: usize = 60;
const DOWNWARD_STEP: f64 = 1.25;
/// Candidate lists are compacted to their Pareto front past this many entries.
const COMPACT_AT: usize = 1 << 16;

struct Block {
    indices: Vec<usize>,
    v: DMatrix<f64>,
    c: DVector<f64>,
    /// Largest power this block may use given the others' minimum.
    norm_cap: f64,
}

/// Groups coordinates into the connected components of the sparsity graph of `V`.
fn find_blocks(prog: &RealQuadraticProgram, budget: f64) -> Vec<Block> {
    let n = prog.dim();
    let v = prog.quadratic();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if v[(i, j)] != 0.0 {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    let minsq = prog.min_label_sq();
    groups
        .into_iter()
        .map(|indices| {
            let m = indices.len();
            let bv = DMatrix::from_fn(m, m, |r, s| v[(indices[r], indices[s])]);
            let bc = DVector::from_fn(m, |r, _| prog.linear()[indices[r]]);
            let norm_cap = budget - (n - m) as f64 * minsq + POWER_TOLERANCE;
            Block {
                indices,
                v: bv,
                c: bc,
                norm_cap,
            }
        })
        .collect()
}

/// Per-block minimizers of the Lagrangian at one multiplier.
struct DualPoint {
    lambda: f64,
    /// `sum_b g_b* - lambda q`.
    value: f64,
    /// Minimum distance of each block search (the slack origin).
    dist: Vec<f64>,
    x: Vec<usize>,
    norm: f64,
}

struct Entry {
    f: f64,
    norm: f64,
    slack: f64,
    offset: usize,
}

/// Candidate list of one block, kept as a Pareto front in (objective, norm).
struct CandidateList {
    width: usize,
    entries: Vec<Entry>,
    xs: Vec<usize>,
}

impl CandidateList {
    fn new(width: usize) -> Self {
        Self {
            width,
            entries: Vec::new(),
            xs: Vec::new(),
        }
    }

    fn push(&mut self, x: &[usize], f: f64, norm: f64, slack: f64) {
        self.entries.push(Entry {
            f,
            norm,
            slack,
            offset: self.xs.len(),
        });
        self.xs.extend_from_slice(x);
    }

    fn x(&self, e: &Entry) -> &[usize] {
        &self.xs[e.offset..e.offset + self.width]
    }

    /// Drops every entry dominated in both objective and norm. Dominance there
    /// implies dominance in slack, which is an increasing function of both.
    fn compact(&mut self) {
        let mut entries = std::mem::take(&mut self.entries);
        entries.sort_by(|a, b| a.norm.total_cmp(&b.norm).then(a.f.total_cmp(&b.f)));
        let mut xs = Vec::new();
        let mut kept = Vec::new();
        let mut best = f64::INFINITY;
        for e in entries {
            if e.f < best {
                best = e.f;
                let offset = xs.len();
                xs.extend_from_slice(&self.xs[e.offset..e.offset + self.width]);
                kept.push(Entry { offset, ..e });
            }
        }
        self.entries = kept;
        self.xs = xs;
    }
}

struct Decomposition<'a> {
    prog: &'a RealQuadraticProgram,
    cfg: &'a SolverConfig,
    blocks: Vec<Block>,
    /// Largest attainable squared norm within the power budget.
    budget_power: f64,
    labels: Vec<f64>,
    budget: Budget,
    incumbent: (Vec<usize>, f64),
    trace: Vec<IncumbentUpdate>,
    lower_bound: f64,
    block_solves: u64,
}

impl<'a> Decomposition<'a> {
    fn offer(&mut self, x: Vec<usize>) {
        let a = self.prog.labels_of(&x);
        if !self.prog.is_power_feasible(&a) {
            return;
        }
        let f = self.prog.objective(&a);
        if f < self.incumbent.1 {
            self.incumbent = (x, f);
            self.trace.push(IncumbentUpdate {
                node: self.budget.nodes,
                objective: f,
            });
        }
    }

    fn searches(&self, lambda: f64) -> Option<Vec<BlockSearch>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut q = b.v.clone();
                for i in 0..q.nrows() {
                    q[(i, i)] += lambda;
                }
                BlockSearch::new(&q, &b.c, self.labels.clone(), self.prog.delta())
            })
            .collect()
    }

    /// `None` when some block is not positive definite at this multiplier.
    fn dual(&mut self, lambda: f64) -> std::result::Result<Option<DualPoint>, Exhausted> {
        let Some(searches) = self.searches(lambda) else {
            return Ok(None);
        };
        let mut x = vec![0; self.prog.dim()];
        let mut dist = Vec::with_capacity(self.blocks.len());
        let mut value = -lambda * self.budget_power;
        let mut norm = 0.0;
        for (block, search) in self.blocks.iter().zip(&searches) {
            self.block_solves += 1;
            let Some((bx, d, bn)) = search.minimize(block.norm_cap, &mut self.budget)? else {
                // the norm cap excludes everything: the program itself is infeasible
                return Ok(None);
            };
            for (k, &i) in block.indices.iter().enumerate() {
                x[i] = bx[k];
            }
            dist.push(d);
            value += d + search.constant;
            norm += bn;
        }
        Ok(Some(DualPoint {
            lambda,
            value,
            dist,
            x,
            norm,
        }))
    }

    /// Maximizes the dual function over `lambda >= floor`, starting near `guess`.
    /// Stops early once the bound meets the incumbent.
    fn maximize_dual(&mut self, guess: f64, floor: f64) -> std::result::Result<Option<DualPoint>, Exhausted> {
        let mut best: Option<DualPoint> = None;
        // power excess of the Lagrangian minimizer, or `None` when the gap is closed
        let mut consider = |this: &mut Self, p: DualPoint| -> Option<f64> {
            let excess = p.norm - this.budget_power;
            if excess <= POWER_TOLERANCE {
                this.offer(p.x.clone());
            }
            if best.as_ref().is_none_or(|b| p.value > b.value) {
                best = Some(p);
            }
            let bound = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value);
            (this.incumbent.1 - bound > this.cfg.gap_tolerance).then_some(excess)
        };
        macro_rules! eval {
            ($lambda:expr) => {
                match self.dual($lambda)? {
                    Some(p) => match consider(self, p) {
                        Some(excess) => Some(excess),
                        None => return Ok(best),
                    },
                    None => None,
                }
            };
        }

        let start = guess.max(floor);
        let (mut lo, mut hi);
        match eval!(start) {
            None => return Ok(best),
            Some(excess) if excess > POWER_TOLERANCE => {
                // power too large: the maximizing multiplier is above
                lo = start;
                hi = start.max(1e-12) * 4.0;
                loop {
                    match eval!(hi) {
                        None => return Ok(best),
                        Some(excess) if excess > POWER_TOLERANCE => {
                            lo = hi;
                            hi *= 4.0;
                        }
                        Some(_) => break,
                    }
                }
            }
            Some(_) => {
                hi = start;
                let mut probe = start;
                loop {
                    if probe <= floor {
                        return Ok(best);
                    }
                    // small multipliers flatten the block searches, so approach them gently
                    probe = (probe / DOWNWARD_STEP).max(floor);
                    match eval!(probe) {
                        Some(excess) if excess <= POWER_TOLERANCE => hi = probe,
                        _ => {
                            lo = probe;
                            break;
                        }
                    }
                }
            }
        }
        for _ in 0..BISECTION_STEPS {
            if hi - lo <= 1e-7 * hi {
                break;
            }
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { hi / 2.0 };
            match eval!(mid) {
                Some(excess) if excess <= POWER_TOLERANCE => hi = mid,
                _ => lo = mid,
            }
        }
        Ok(best)
    }

    /// Enumerates every point whose Lagrangian slack at `dual` is below `delta`
    /// and offers the best feasible one.
    fn close_gap(&mut self, dual: &DualPoint, delta: f64) -> std::result::Result<(), Exhausted> {
        let searches = self.searches(dual.lambda).expect("multiplier was usable before");
        let lambda = dual.lambda;
        let mut lists = Vec::with_capacity(self.blocks.len());
        for (b, (block, search)) in self.blocks.iter().zip(&searches).enumerate() {
            let width = block.indices.len();
            let origin = dual.dist[b];
            let radius = origin + delta * (1.0 + 1e-12) + 1e-12;
            let mut list = CandidateList::new(width);
            let constant = search.constant;
            search.search(radius, block.norm_cap, &mut self.budget, |x, d, norm| {
                list.push(x, d + constant - lambda * norm, norm, d - origin);
                if list.entries.len() >= COMPACT_AT {
                    list.compact();
                }
                Visit::Continue
            })?;
            list.compact();
            list.entries.sort_by(|a, b| a.slack.total_cmp(&b.slack));
            lists.push(list);
        }

        // merge block by block; each stage keeps its own Pareto front
        struct Partial {
            f: f64,
            norm: f64,
            slack: f64,
            parent: usize,
            entry: usize,
        }
        let mut rest_norm: Vec<f64> = lists
            .iter()
            .map(|l| l.entries.iter().map(|e| e.norm).fold(f64::INFINITY, f64::min))
            .collect();
        for b in (0..rest_norm.len()).rev() {
            let after = if b + 1 < rest_norm.len() { rest_norm[b + 1] } else { 0.0 };
            rest_norm[b] += after;
        }
        let cap = self.budget_power + POWER_TOLERANCE;
        let limit = delta * (1.0 + 1e-12) + 1e-12;
        let mut stages: Vec<Vec<Partial>> = Vec::with_capacity(lists.len());
        let mut prev = vec![Partial {
            f: 0.0,
            norm: 0.0,
            slack: 0.0,
            parent: usize::MAX,
            entry: usize::MAX,
        }];
        for (b, list) in lists.iter().enumerate() {
            let after = rest_norm.get(b + 1).copied().unwrap_or(0.0);
            let mut next = Vec::new();
            for (pi, p) in prev.iter().enumerate() {
                for (ei, e) in list.entries.iter().enumerate() {
                    self.budget.tick()?;
                    if p.slack + e.slack >= limit {
                        break;
                    }
                    let norm = p.norm + e.norm;
                    if norm + after > cap {
                        continue;
                    }
                    next.push(Partial {
                        f: p.f + e.f,
                        norm,
                        slack: p.slack + e.slack,
                        parent: pi,
                        entry: ei,
                    });
                }
            }
            next.sort_by(|a, b| a.norm.total_cmp(&b.norm).then(a.f.total_cmp(&b.f)));
            let mut best = f64::INFINITY;
            next.retain(|p| {
                let keep = p.f < best;
                if keep {
                    best = p.f;
                }
                keep
            });
            next.sort_by(|a, b| a.slack.total_cmp(&b.slack));
            stages.push(std::mem::replace(&mut prev, next));
        }
        stages.push(prev);
        let last = stages.last().expect("at least one stage");
        let Some(best) = (0..last.len()).min_by(|&i, &j| last[i].f.total_cmp(&last[j].f)) else {
            return Ok(());
        };
        let mut x = vec![0; self.prog.dim()];
        let mut at = best;
        for b in (0..lists.len()).rev() {
            let p = &stages[b + 1][at];
            let e = &lists[b].entries[p.entry];
            for (k, &i) in self.blocks[b].indices.iter().enumerate() {
                x[i] = lists[b].x(e)[k];
            }
            at = p.parent;
        }
        self.offer(x);
        Ok(())
    }

    fn run(&mut self) -> std::result::Result<SolveStatus, Exhausted> {
        let n = self.prog.dim();
        let relax = Relaxer::new(self.prog).solve(
            &BoxBall::new(
                vec![self.prog.label(0); n],
                vec![self.prog.label(self.prog.levels() - 1); n],
                self.prog.power(),
            ),
            &vec![0.0; n],
            self.cfg,
        );
        self.lower_bound = self.lower_bound.max(relax.lower_bound);
        if let Some((x, _)) = incumbent_from(self.prog, &relax.a) {
            self.offer(x);
        }
        if self.incumbent.1 - self.lower_bound <= self.cfg.gap_tolerance {
            return Ok(SolveStatus::Optimal);
        }

        // stationarity of the relaxation along its own direction estimates the multiplier
        let a2: f64 = relax.a.iter().map(|v| v * v).sum();
        let guess = if a2 > 0.0 {
            let va = self.prog.quadratic() * DVector::from_column_slice(&relax.a);
            let num: f64 = relax
                .a
                .iter()
                .zip(va.iter())
                .zip(self.prog.linear().iter())
                .map(|((a, va), c)| a * (c - va))
                .sum();
            (num / a2).max(0.0)
        } else {
            0.0
        };
        let scale = self.prog.quadratic().diagonal().max().max(f64::MIN_POSITIVE);
        let floor = if self.searches(0.0).is_some() { 0.0 } else { 1e-7 * scale };
        let Some(dual) = self.maximize_dual(guess, floor)? else {
            return Ok(SolveStatus::Optimal);
        };
        self.lower_bound = self.lower_bound.max(dual.value);

        let mut delta = (self.incumbent.1 - dual.value).min(1e-3 * (1.0 + dual.value.abs()));
        loop {
            let need = self.incumbent.1 - dual.value;
            if need <= self.cfg.gap_tolerance {
                return Ok(SolveStatus::Optimal);
            }
            delta = delta.min(need);
            self.close_gap(&dual, delta)?;
            let need = self.incumbent.1 - dual.value;
            if need <= delta {
                return Ok(SolveStatus::Optimal);
            }
            delta = need;
        }
    }
}

/// Exact solver based on Lagrangian decomposition and per-block enumeration.
///
/// Returns the same optimum as [`super::brute_force_solve`] (up to ties and the
/// gap tolerance) when it finishes within the budget.
pub fn decomposed_search(prog: &RealQuadraticProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let started = Instant::now();
    let Some(budget_power) = prog.max_attainable_power() else {
        return Ok(SolveResult::infeasible(started));
    };
    let n = prog.dim();
    let zero = vec![prog.zero_index(); n];
    let f0 = prog.objective(&prog.labels_of(&zero));
    let mut search = Decomposition {
        prog,
        cfg,
        blocks: find_blocks(prog, budget_power),
        budget_power,
        labels: (0..prog.levels()).map(|z| prog.label(z)).collect(),
        budget: Budget::new(cfg, started),
        incumbent: (zero, f0),
        trace: vec![IncumbentUpdate { node: 0, objective: f0 }],
        lower_bound: f64::NEG_INFINITY,
        block_solves: 0,
    };
    let status = search.run().unwrap_or(SolveStatus::TimeLimitIncumbent);
    let (x, objective) = search.incumbent.clone();
    let lower_bound = match status {
        SolveStatus::Optimal => objective,
        _ => search.lower_bound.min(objective),
    };
    Ok(SolveResult {
        point: Some(LatticePoint::new(prog, x)),
        objective,
        lower_bound,
        status,
        nodes_explored: search.budget.nodes,
        relaxation_solves: 1 + search.block_solves,
        wall_time: started.elapsed(),
        incumbent_trace: search.trace,
    })
}
