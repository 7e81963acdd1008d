//! Relaxation-based branch-and-bound over the integer box.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::heuristics::{round_to_lattice, Candidate};
use super::program::{LatticePoint, RealQuadraticProgram};
use super::projection::BoxBall;
use super::relaxation::Relaxer;
use super::{Budget, IncumbentUpdate, NodeSelection, SolveResult, SolveStatus, SolverConfig};
use crate::error::Result;

const INTEGRALITY_TOLERANCE: f64 = 1e-6;

struct Node {
    id: u64,
    lo: Vec<usize>,
    hi: Vec<usize>,
    /// Parent's relaxation bound, valid for this node too.
    bound: f64,
    warm: Vec<f64>,
}

struct ByBound(Node);

impl PartialEq for ByBound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ByBound {}

impl PartialOrd for ByBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByBound {
    // max-heap: smallest bound first, then oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    prog: &'a RealQuadraticProgram,
    cfg: &'a SolverConfig,
    relaxer: Relaxer<'a>,
    incumbent: Option<(Vec<usize>, f64)>,
    trace: Vec<IncumbentUpdate>,
    processed: u64,
    relaxations: u64,
    next_id: u64,
    /// Smallest bound among nodes pruned by bound.
    pruned_bound: f64,
}

impl<'a> Search<'a> {
    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(_, f)| *f)
    }

    fn offer(&mut self, x: Vec<usize>, f: f64) {
        if f < self.incumbent_value() {
            self.incumbent = Some((x, f));
            self.trace.push(IncumbentUpdate {
                node: self.processed,
                objective: f,
            });
        }
    }

    fn label_box(&self, lo: &[usize], hi: &[usize]) -> BoxBall {
        BoxBall::new(
            lo.iter().map(|&z| self.prog.label(z)).collect(),
            hi.iter().map(|&z| self.prog.label(z)).collect(),
            self.prog.power(),
        )
    }

    fn prunable(&self, bound: f64) -> bool {
        bound >= self.incumbent_value() - self.cfg.gap_tolerance
    }

    /// Solves the node relaxation and returns its children.
    fn expand(&mut self, node: Node) -> Vec<Node> {
        let set = self.label_box(&node.lo, &node.hi);
        if set.is_empty() {
            return Vec::new();
        }
        let relax = self.relaxer.solve(&set, &node.warm, self.cfg);
        self.relaxations += 1;
        let bound = relax.lower_bound.max(node.bound);
        if self.prunable(bound) {
            self.pruned_bound = self.pruned_bound.min(bound);
            return Vec::new();
        }

        // incumbent: round inside the node box, repair, polish
        let x0 = round_to_lattice(self.prog, &relax.a, &node.lo, &node.hi);
        let mut cand = Candidate::new(self.prog, x0);
        if cand.repair() {
            cand.polish();
            let Candidate { x, objective, .. } = cand;
            self.offer(x, objective);
        }
        if self.prunable(bound) {
            self.pruned_bound = self.pruned_bound.min(bound);
            return Vec::new();
        }

        let xhat: Vec<f64> = relax
            .a
            .iter()
            .map(|a| a / self.prog.delta() + self.prog.center())
            .collect();
        let mut branch: Option<(usize, f64)> = None;
        for (i, &v) in xhat.iter().enumerate() {
            if node.lo[i] == node.hi[i] {
                continue;
            }
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INTEGRALITY_TOLERANCE && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((i, frac));
            }
        }
        let (var, split) = match branch {
            Some((i, _)) => (i, xhat[i].floor() as usize),
            None => {
                // integral relaxation: exact when the bound is tight, otherwise split the widest range
                let x: Vec<usize> = round_to_lattice(self.prog, &relax.a, &node.lo, &node.hi);
                let a = self.prog.labels_of(&x);
                if self.prog.is_power_feasible(&a) {
                    let f = self.prog.objective(&a);
                    self.offer(x, f);
                }
                if self.prunable(bound) {
                    return Vec::new();
                }
                let Some(i) = (0..node.lo.len())
                    .filter(|&i| node.lo[i] < node.hi[i])
                    .max_by_key(|&i| (node.hi[i] - node.lo[i], std::cmp::Reverse(i)))
                else {
                    return Vec::new();
                };
                (i, (node.lo[i] + node.hi[i]) / 2)
            }
        };
        let split = split.clamp(node.lo[var], node.hi[var] - 1);
        let mut down = Node {
            id: 0,
            lo: node.lo.clone(),
            hi: node.hi.clone(),
            bound,
            warm: relax.a.clone(),
        };
        down.hi[var] = split;
        let mut up = Node {
            id: 0,
            lo: node.lo,
            hi: node.hi,
            bound,
            warm: relax.a,
        };
        up.lo[var] = split + 1;
        // the child nearer the relaxation is explored first under depth-first
        let children = if xhat[var] - split as f64 > 0.5 { [down, up] } else { [up, down] };
        children
            .into_iter()
            .map(|mut c| {
                self.next_id += 1;
                c.id = self.next_id;
                c
            })
            .collect()
    }
}

/// Branch-and-bound with continuous relaxations over box and ball.
///
/// Nodes carry integer bounds per coordinate; the child split is
/// `x_i <= floor(x_i*)` / `x_i >= ceil(x_i*)` on the most fractional coordinate.
/// Best-first selection falls back to depth-first while more than
/// `cfg.max_open_nodes` nodes are open.
pub fn branch_and_bound(prog: &RealQuadraticProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let started = Instant::now();
    if prog.min_lattice_power() > prog.power() + super::POWER_TOLERANCE {
        return Ok(SolveResult::infeasible(started));
    }
    let n = prog.dim();
    let mut budget = Budget::new(cfg, started);
    let mut search = Search {
        prog,
        cfg,
        relaxer: Relaxer::new(prog),
        incumbent: None,
        trace: Vec::new(),
        processed: 0,
        relaxations: 0,
        next_id: 0,
        pruned_bound: f64::INFINITY,
    };
    // the smallest-norm point is always feasible here
    let zero = vec![prog.zero_index(); n];
    let f0 = prog.objective(&prog.labels_of(&zero));
    search.offer(zero, f0);

    let root = Node {
        id: 0,
        lo: vec![0; n],
        hi: vec![prog.levels() - 1; n],
        bound: f64::NEG_INFINITY,
        warm: vec![0.0; n],
    };
    let mut heap: BinaryHeap<ByBound> = BinaryHeap::new();
    let mut stack: Vec<Node> = Vec::new();
    let depth_first = cfg.node_selection == NodeSelection::DepthFirst;
    if depth_first {
        stack.push(root);
    } else {
        heap.push(ByBound(root));
    }
    let mut exhausted = false;
    loop {
        let node = match stack.pop() {
            Some(node) => node,
            None => match heap.pop() {
                Some(ByBound(node)) => node,
                None => break,
            },
        };
        if search.prunable(node.bound) {
            search.pruned_bound = search.pruned_bound.min(node.bound);
            continue;
        }
        if budget.tick().is_err() {
            exhausted = true;
            if depth_first || !stack.is_empty() {
                stack.push(node);
            } else {
                heap.push(ByBound(node));
            }
            break;
        }
        search.processed += 1;
        let children = search.expand(node);
        let to_stack = depth_first || !stack.is_empty() || heap.len() >= cfg.max_open_nodes;
        for child in children {
            if to_stack {
                stack.push(child);
            } else {
                heap.push(ByBound(child));
            }
        }
    }

    let (x, objective) = search.incumbent.clone().expect("feasible program has an incumbent");
    let open_bound = stack
        .iter()
        .map(|n| n.bound)
        .chain(heap.iter().map(|n| n.0.bound))
        .fold(f64::INFINITY, f64::min);
    let lower_bound = objective.min(search.pruned_bound).min(open_bound);
    Ok(SolveResult {
        point: Some(LatticePoint::new(prog, x)),
        objective,
        lower_bound,
        status: if exhausted {
            SolveStatus::TimeLimitIncumbent
        } else {
            SolveStatus::Optimal
        },
        nodes_explored: search.processed,
        relaxation_solves: search.relaxations,
        wall_time: started.elapsed(),
        incumbent_trace: search.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qap::brute_force_solve;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn scalar_example() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let prog = RealQuadraticProgram::new(v, DVector::from_vec(vec![1.0, -1.0]), 1.0, 1.0, 2).unwrap();
        let r = branch_and_bound(&prog, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.point.unwrap().a, vec![0.5, -0.5]);
        assert!((r.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_linear_term_hits_smallest_magnitude() {
        let v = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.3 });
        let prog = RealQuadraticProgram::new(v, DVector::zeros(4), 10.0, 0.8, 4).unwrap();
        let bnb = branch_and_bound(&prog, &SolverConfig::default()).unwrap();
        let brute = brute_force_solve(&prog).unwrap();
        assert!((bnb.objective - brute.objective).abs() < 1e-9);
        assert!(bnb.point.unwrap().a.iter().all(|a| (a.abs() - 0.4).abs() < 1e-12));
    }

    #[test]
    fn depth_first_and_node_limit() {
        let v = DMatrix::from_fn(5, 5, |i, j| if i == j { 3.0 } else { 0.5 + 0.1 * (i + j) as f64 });
        let c = DVector::from_fn(5, |i, _| 1.0 - 0.4 * i as f64);
        let prog = RealQuadraticProgram::new(v, c, 2.0, 0.3, 8).unwrap();
        let dfs = SolverConfig {
            node_selection: NodeSelection::DepthFirst,
            ..SolverConfig::default()
        };
        let a = branch_and_bound(&prog, &SolverConfig::default()).unwrap();
        let b = branch_and_bound(&prog, &dfs).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-9);
        let capped = SolverConfig {
            node_limit: Some(1),
            ..SolverConfig::default()
        };
        let c = branch_and_bound(&prog, &capped).unwrap();
        assert_eq!(c.status, SolveStatus::TimeLimitIncumbent);
        assert!(prog.is_power_feasible(&c.point.unwrap().a));
    }

    #[test]
    fn infeasible_program() {
        let prog = RealQuadraticProgram::new(DMatrix::identity(3, 3), DVector::zeros(3), 0.5, 1.0, 2).unwrap();
        assert_eq!(branch_and_bound(&prog, &SolverConfig::default()).unwrap().status, SolveStatus::Infeasible);
    }
}
