//! Continuous relaxation of a node: minimize `a^T V a - 2 c^T a` over a box
//! intersected with the power ball, by accelerated projected gradient with
//! adaptive restart. The reported lower bound comes from the Frank-Wolfe
//! linearization at the final iterate, so it is valid even when the iteration
//! budget runs out.

use super::projection::BoxBall;
use super::program::RealQuadraticProgram;
use super::SolverConfig;

/// Outcome of one relaxation solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub a: Vec<f64>,
    pub objective: f64,
    /// Valid lower bound on the relaxation minimum.
    pub lower_bound: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the gap closed; the bound
    /// is then conservative.
    pub converged: bool,
}

/// Largest eigenvalue of `2 V` by power iteration, inflated slightly so it is an
/// upper estimate.
pub fn gradient_lipschitz(prog: &RealQuadraticProgram) -> f64 {
    let v = prog.quadratic();
    let n = prog.dim();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut estimate = 0.0;
    for _ in 0..300 {
        let y: Vec<f64> = (0..n).map(|i| (0..n).map(|j| v[(i, j)] * x[j]).sum()).collect();
        let norm = y.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 1.0;
        }
        estimate = norm / x.iter().map(|t| t * t).sum::<f64>().sqrt();
        x = y.iter().map(|t| t / norm).collect();
    }
    let trace_bound: f64 = (0..n).map(|i| v[(i, i)]).sum();
    (2.0 * 1.05 * estimate).min(2.0 * trace_bound).max(1e-300)
}

pub(crate) struct Relaxer<'a> {
    prog: &'a RealQuadraticProgram,
    step: f64,
}

impl<'a> Relaxer<'a> {
    pub(crate) fn new(prog: &'a RealQuadraticProgram) -> Self {
        Self {
            prog,
            step: 1.0 / gradient_lipschitz(prog),
        }
    }

    fn gradient(&self, a: &[f64], out: &mut [f64]) {
        let v = self.prog.quadratic();
        let c = self.prog.linear();
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (j, aj) in a.iter().enumerate() {
                s += v[(i, j)] * aj;
            }
            *o = 2.0 * (s - c[i]);
        }
    }

    fn bound_at(&self, set: &BoxBall, a: &[f64], f: f64, grad: &[f64]) -> f64 {
        let (lin, _) = set.linear_lower_bound(grad);
        let g_dot_a: f64 = grad.iter().zip(a).map(|(g, x)| g * x).sum();
        f - g_dot_a + lin
    }

    pub(crate) fn solve(&self, set: &BoxBall, warm: &[f64], cfg: &SolverConfig) -> Relaxation {
        let n = self.prog.dim();
        let mut x = set.project(warm);
        let mut fx = self.prog.objective(&x);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut grad = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut bound = f64::NEG_INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.relaxation_max_iterations {
            iterations += 1;
            self.gradient(&y, &mut grad);
            for i in 0..n {
                trial[i] = y[i] - self.step * grad[i];
            }
            let next = set.project(&trial);
            let f_next = self.prog.objective(&next);
            if f_next > fx {
                // non-monotone step: restart momentum from the current iterate
                if t == 1.0 {
                    break;
                }
                t = 1.0;
                y.copy_from_slice(&x);
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            for i in 0..n {
                y[i] = next[i] + momentum * (next[i] - x[i]);
            }
            x = next;
            fx = f_next;
            t = t_next;
            if iterations % 5 == 0 {
                self.gradient(&x, &mut grad);
                bound = bound.max(self.bound_at(set, &x, fx, &grad));
                if fx - bound <= cfg.relaxation_tolerance {
                    converged = true;
                    break;
                }
            }
        }
        if !converged {
            self.gradient(&x, &mut grad);
            bound = bound.max(self.bound_at(set, &x, fx, &grad));
            converged = fx - bound <= cfg.relaxation_tolerance;
        }
        Relaxation {
            a: x,
            objective: fx,
            lower_bound: bound.min(fx),
            iterations,
            converged,
        }
    }
}

/// Solves the relaxation over the per-coordinate label box `[lo, hi]` intersected
/// with the power ball, starting from `warm`.
pub fn solve_relaxation(
    prog: &RealQuadraticProgram,
    lo: &[f64],
    hi: &[f64],
    warm: &[f64],
    cfg: &SolverConfig,
) -> Relaxation {
    let set = BoxBall::new(lo.to_vec(), hi.to_vec(), prog.power());
    Relaxer::new(prog).solve(&set, warm, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn identity_program_minimum_at_origin() {
        let prog = RealQuadraticProgram::new(DMatrix::identity(3, 3), DVector::zeros(3), 100.0, 1.0, 4).unwrap();
        let r = solve_relaxation(&prog, &[-1.0; 3], &[1.0; 3], &[0.7, -0.3, 0.9], &SolverConfig::default());
        assert!(r.converged);
        assert!(r.a.iter().all(|v| v.abs() < 1e-6));
        assert!(r.lower_bound.abs() < 1e-8 && r.lower_bound <= r.objective);
    }

    #[test]
    fn stationary_point_inside_constraints() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let c = DVector::from_vec(vec![1.0, -1.0]);
        let prog = RealQuadraticProgram::new(v, c, 10.0, 1.0, 8).unwrap();
        let r = solve_relaxation(&prog, &[-5.0; 2], &[5.0; 2], &[0.0, 0.0], &SolverConfig::default());
        assert!((r.a[0] - 0.5).abs() < 1e-6 && (r.a[1] + 0.5).abs() < 1e-6);
        assert!((r.objective + 1.0).abs() < 1e-9);
        assert!(r.lower_bound <= -1.0 + 1e-12 && r.lower_bound > -1.0 - 1e-8);
    }

    #[test]
    fn bound_is_valid_when_budget_is_tiny() {
        let v = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let c = DVector::from_vec(vec![4.0, -2.0]);
        let prog = RealQuadraticProgram::new(v, c, 1.0, 1.0, 8).unwrap();
        let cfg = SolverConfig {
            relaxation_max_iterations: 1,
            ..SolverConfig::default()
        };
        let tight = solve_relaxation(&prog, &[-3.0; 2], &[3.0; 2], &[0.0; 2], &SolverConfig::default());
        let loose = solve_relaxation(&prog, &[-3.0; 2], &[3.0; 2], &[0.0; 2], &cfg);
        assert!(loose.lower_bound <= tight.objective + 1e-12);
        assert!(tight.converged);
    }
}
