use std::time::Instant;

use super::program::{LatticePoint, RealQuadraticProgram};
use super::{IncumbentUpdate, SolveResult, SolveStatus};
use crate::error::{Error, Result};

/// Largest lattice (`L^n` points) the exhaustive search accepts.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Exhaustive search over all `L^n` lattice points.
///
/// Points are visited in lexicographic order of `x` and a later point replaces
/// the incumbent only when strictly better (beyond `1e-12` relative), so among
/// tied optima the lexicographically smallest is returned.
pub fn brute_force_solve(prog: &RealQuadraticProgram) -> Result<SolveResult> {
    let started = Instant::now();
    let n = prog.dim();
    let levels = prog.levels();
    let points = (levels as f64).powi(n as i32);
    if points > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeGuard {
            points,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut x = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut trace = Vec::new();
    let mut visited = 0u64;
    loop {
        visited += 1;
        let a = prog.labels_of(&x);
        if prog.is_power_feasible(&a) {
            let f = prog.objective(&a);
            let better = match &best {
                None => true,
                Some((_, b)) => f < b - 1e-12 * (1.0 + b.abs()),
            };
            if better {
                best = Some((x.clone(), f));
                trace.push(IncumbentUpdate {
                    node: visited,
                    objective: f,
                });
            }
        }
        // odometer with x[0] most significant
        let mut i = n;
        loop {
            if i == 0 {
                let wall_time = started.elapsed();
                return Ok(match best {
                    None => SolveResult {
                        nodes_explored: visited,
                        ..SolveResult::infeasible(started)
                    },
                    Some((x, f)) => SolveResult {
                        point: Some(LatticePoint::new(prog, x)),
                        objective: f,
                        lower_bound: f,
                        status: SolveStatus::Optimal,
                        nodes_explored: visited,
                        relaxation_solves: 0,
                        wall_time,
                        incumbent_trace: trace,
                    },
                });
            }
            i -= 1;
            x[i] += 1;
            if x[i] < levels {
                break;
            }
            x[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn scalar_example() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let prog = RealQuadraticProgram::new(v, DVector::from_vec(vec![1.0, -1.0]), 1.0, 1.0, 2).unwrap();
        let r = brute_force_solve(&prog).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.point.unwrap().a, vec![0.5, -0.5]);
        assert!((r.objective + 1.0).abs() < 1e-15);
    }

    #[test]
    fn lexicographic_tie_break() {
        let prog = RealQuadraticProgram::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0, 1.0, 2).unwrap();
        let r = brute_force_solve(&prog).unwrap();
        assert_eq!(r.point.unwrap().x, vec![0, 0]);
        assert_eq!(r.objective, 0.5);
    }

    #[test]
    fn infeasible_when_ball_is_tiny() {
        let prog = RealQuadraticProgram::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.1, 1.0, 2).unwrap();
        let r = brute_force_solve(&prog).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.point.is_none());
    }

    #[test]
    fn size_guard() {
        let prog = RealQuadraticProgram::new(DMatrix::identity(12, 12), DVector::zeros(12), 1.0, 1.0, 8).unwrap();
        assert!(matches!(brute_force_solve(&prog), Err(Error::SizeGuard { .. })));
    }
}
