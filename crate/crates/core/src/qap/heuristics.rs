//! Incumbent construction: round, repair onto the power ball, polish with
//! single-coordinate moves.

use super::program::{RealQuadraticProgram, POWER_TOLERANCE};

/// Working state for incremental objective updates.
pub(crate) struct Candidate<'a> {
    prog: &'a RealQuadraticProgram,
    pub x: Vec<usize>,
    a: Vec<f64>,
    /// `V a`
    va: Vec<f64>,
    power: f64,
    pub objective: f64,
}

impl<'a> Candidate<'a> {
    pub(crate) fn new(prog: &'a RealQuadraticProgram, x: Vec<usize>) -> Self {
        let a = prog.labels_of(&x);
        let v = prog.quadratic();
        let n = prog.dim();
        let va: Vec<f64> = (0..n).map(|i| (0..n).map(|j| v[(i, j)] * a[j]).sum()).collect();
        let power = a.iter().map(|t| t * t).sum();
        let objective = prog.objective(&a);
        Self {
            prog,
            x,
            a,
            va,
            power,
            objective,
        }
    }

    pub(crate) fn is_feasible(&self) -> bool {
        self.power <= self.prog.power() + POWER_TOLERANCE
    }

    /// Objective change from moving coordinate `i` to index `z`.
    fn delta_objective(&self, i: usize, z: usize) -> (f64, f64) {
        let d = self.prog.label(z) - self.a[i];
        let vii = self.prog.quadratic()[(i, i)];
        let df = d * d * vii + 2.0 * d * self.va[i] - 2.0 * d * self.prog.linear()[i];
        let dp = d * (2.0 * self.a[i] + d);
        (df, dp)
    }

    fn apply(&mut self, i: usize, z: usize) {
        let (df, dp) = self.delta_objective(i, z);
        let d = self.prog.label(z) - self.a[i];
        let v = self.prog.quadratic();
        for (j, vaj) in self.va.iter_mut().enumerate() {
            *vaj += v[(j, i)] * d;
        }
        self.a[i] += d;
        self.x[i] = z;
        self.objective += df;
        self.power += dp;
    }

    /// Moves the largest-magnitude label one step toward zero until the power
    /// constraint holds. Returns false if even the smallest-norm point fails.
    pub(crate) fn repair(&mut self) -> bool {
        let zero = self.prog.zero_index();
        while !self.is_feasible() {
            let mut worst: Option<usize> = None;
            for i in 0..self.x.len() {
                if self.x[i] == zero || (self.x[i] + 1 == zero && self.prog.levels().is_multiple_of(2)) {
                    continue;
                }
                if worst.is_none_or(|w| self.a[i].abs() > self.a[w].abs()) {
                    worst = Some(i);
                }
            }
            let Some(i) = worst else {
                return false;
            };
            let z = if self.x[i] > zero { self.x[i] - 1 } else { self.x[i] + 1 };
            self.apply(i, z);
        }
        true
    }

    /// Best single-coordinate improvement passes until none helps.
    pub(crate) fn polish(&mut self) {
        let levels = self.prog.levels();
        let budget = self.prog.power() + POWER_TOLERANCE;
        loop {
            let mut improved = false;
            for i in 0..self.x.len() {
                let mut best: Option<(usize, f64)> = None;
                for z in 0..levels {
                    if z == self.x[i] {
                        continue;
                    }
                    let (df, dp) = self.delta_objective(i, z);
                    if self.power + dp <= budget && df < -1e-12 * (1.0 + self.objective.abs()) && best.is_none_or(|(_, b)| df < b) {
                        best = Some((z, df));
                    }
                }
                if let Some((z, _)) = best {
                    self.apply(i, z);
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        // refresh accumulated rounding
        self.objective = self.prog.objective(&self.a);
    }
}

/// Nearest lattice index of each real coordinate, clamped to `[lo, hi]`.
pub(crate) fn round_to_lattice(prog: &RealQuadraticProgram, a: &[f64], lo: &[usize], hi: &[usize]) -> Vec<usize> {
    a.iter()
        .enumerate()
        .map(|(i, v)| {
            let r = (v / prog.delta() + prog.center()).round();
            (r.max(lo[i] as f64).min(hi[i] as f64)) as usize
        })
        .collect()
}

/// Round, repair and polish a continuous point into a feasible lattice point.
pub(crate) fn incumbent_from(prog: &RealQuadraticProgram, a: &[f64]) -> Option<(Vec<usize>, f64)> {
    let n = prog.dim();
    let x = round_to_lattice(prog, a, &vec![0; n], &vec![prog.levels() - 1; n]);
    let mut cand = Candidate::new(prog, x);
    if !cand.repair() {
        return None;
    }
    cand.polish();
    Some((cand.x, cand.objective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn repair_reaches_the_ball() {
        let prog = RealQuadraticProgram::new(DMatrix::identity(3, 3), DVector::from_vec(vec![5.0, 5.0, 5.0]), 0.75, 1.0, 4).unwrap();
        // all-top point has power 3 * 1.5^2; the smallest point 3 * 0.25 = 0.75
        let mut cand = Candidate::new(&prog, vec![3, 3, 3]);
        assert!(!cand.is_feasible());
        assert!(cand.repair());
        assert_eq!(cand.x, vec![2, 2, 2]);
        let small = RealQuadraticProgram::new(DMatrix::identity(3, 3), DVector::zeros(3), 0.5, 1.0, 4).unwrap();
        let mut tight = Candidate::new(&small, vec![3, 0, 3]);
        assert!(!tight.repair());
    }

    #[test]
    fn polish_matches_direct_objective() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let prog = RealQuadraticProgram::new(v, DVector::from_vec(vec![1.0, -0.7]), 4.0, 0.5, 8).unwrap();
        let mut cand = Candidate::new(&prog, vec![0, 7]);
        cand.polish();
        assert!(cand.is_feasible());
        assert!((cand.objective - prog.objective(&prog.labels_of(&cand.x))).abs() < 1e-12);
        // no single move improves
        for i in 0..2 {
            for z in 0..8 {
                let mut x = cand.x.clone();
                x[i] = z;
                let a = prog.labels_of(&x);
                if prog.is_power_feasible(&a) {
                    assert!(prog.objective(&a) >= cand.objective - 1e-12);
                }
            }
        }
    }
}
