//! Schnorr-Euchner enumeration of a box-constrained integer least-squares problem.
//!
//! For a positive definite `Q = R^T R` and `c`, the objective
//! `g(a) = a^T Q a - 2 c^T a = ||R (a - a_hat)||^2 - c^T a_hat` is explored
//! coordinate by coordinate from the last one, visiting the labels of each level
//! in order of distance from the conditional center. A level is abandoned as
//! soon as its partial distance reaches the radius.

use nalgebra::{DMatrix, DVector};

use super::{Budget, Exhausted};

pub(crate) struct BlockSearch {
    n: usize,
    /// Upper-triangular factor, row-major.
    r: Vec<f64>,
    center: Vec<f64>,
    /// `-c^T a_hat`.
    pub constant: f64,
    labels: Vec<f64>,
    delta: f64,
    offset: f64,
    min_label_sq: f64,
}

/// What the visitor wants after seeing a leaf.
pub(crate) enum Visit {
    Continue,
    /// Shrink the radius to the given distance.
    Shrink(f64),
}

impl BlockSearch {
    /// `None` when `Q` is not numerically positive definite.
    pub(crate) fn new(q: &DMatrix<f64>, c: &DVector<f64>, labels: Vec<f64>, delta: f64) -> Option<Self> {
        let n = c.len();
        let chol = q.clone().cholesky()?;
        let l = chol.l();
        if (0..n).any(|i| l[(i, i)] <= 0.0 || !l[(i, i)].is_finite()) {
            return None;
        }
        let center = chol.solve(c);
        if center.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut r = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                r[i * n + j] = l[(j, i)];
            }
        }
        let constant = -c.dot(&center);
        let offset = (labels.len() as f64 - 1.0) / 2.0;
        let min_label_sq = labels.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        Some(Self {
            n,
            r,
            center: center.iter().copied().collect(),
            constant,
            labels,
            delta,
            offset,
            min_label_sq,
        })
    }

    /// Labels at this level ordered by distance from `cen`.
    fn order_into(&self, cen: f64, out: &mut [usize]) {
        let levels = self.labels.len();
        let u = cen / self.delta + self.offset;
        let start = u.round().clamp(0.0, (levels - 1) as f64) as usize;
        out[0] = start;
        let (mut up, mut down) = (start + 1, start as isize - 1);
        for slot in out.iter_mut().skip(1) {
            let take_up = if up >= levels {
                false
            } else if down < 0 {
                true
            } else {
                (self.labels[up] - cen).abs() < (cen - self.labels[down as usize]).abs()
            };
            if take_up {
                *slot = up;
                up += 1;
            } else {
                *slot = down as usize;
                down -= 1;
            }
        }
    }

    /// Visits every lattice point with `||R (a - a_hat)||^2 < radius` and
    /// `||a||^2 <= norm_cap`. The visitor receives the indices, the distance and
    /// the squared norm.
    pub(crate) fn search(
        &self,
        mut radius: f64,
        norm_cap: f64,
        budget: &mut Budget,
        mut visit: impl FnMut(&[usize], f64, f64) -> Visit,
    ) -> Result<(), Exhausted> {
        let n = self.n;
        let levels = self.labels.len();
        let mut x = vec![0usize; n];
        let mut a = vec![0.0; n];
        let mut partial = vec![0.0; n + 1];
        let mut norm = vec![0.0; n + 1];
        let mut cen = vec![0.0; n];
        let mut order = vec![0usize; n * levels];
        let mut pos = vec![0usize; n];

        let mut lev = n - 1;
        cen[lev] = self.center[lev];
        self.order_into(cen[lev], &mut order[lev * levels..(lev + 1) * levels]);
        loop {
            if pos[lev] >= levels {
                lev += 1;
                if lev >= n {
                    return Ok(());
                }
                continue;
            }
            let z = order[lev * levels + pos[lev]];
            pos[lev] += 1;
            budget.tick()?;
            let v = self.labels[z];
            let d = self.r[lev * n + lev] * (v - cen[lev]);
            let dist = partial[lev + 1] + d * d;
            if dist >= radius {
                pos[lev] = levels;
                continue;
            }
            let pn = norm[lev + 1] + v * v;
            if pn + lev as f64 * self.min_label_sq > norm_cap {
                continue;
            }
            x[lev] = z;
            a[lev] = v;
            partial[lev] = dist;
            norm[lev] = pn;
            if lev == 0 {
                if let Visit::Shrink(r) = visit(&x, dist, pn) {
                    radius = r;
                }
                continue;
            }
            lev -= 1;
            let row = &self.r[lev * n..(lev + 1) * n];
            let mut s = 0.0;
            for j in lev + 1..n {
                s += row[j] * (a[j] - self.center[j]);
            }
            cen[lev] = self.center[lev] - s / row[lev];
            self.order_into(cen[lev], &mut order[lev * levels..(lev + 1) * levels]);
            pos[lev] = 0;
        }
    }

    /// Minimizer of the distance subject to the norm cap.
    pub(crate) fn minimize(&self, norm_cap: f64, budget: &mut Budget) -> Result<Option<(Vec<usize>, f64, f64)>, Exhausted> {
        let mut best: Option<(Vec<usize>, f64, f64)> = None;
        self.search(f64::INFINITY, norm_cap, budget, |x, dist, pn| {
            best = Some((x.to_vec(), dist, pn));
            Visit::Shrink(dist)
        })?;
        Ok(best)
    }
}
