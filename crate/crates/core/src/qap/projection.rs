//! Euclidean projection onto, and linear minimization over, the intersection of a
//! box and a centered ball `{z : lo <= z <= hi, ||z||^2 <= q}`.
//!
//! Both reduce to a one-dimensional search on the ball multiplier: for the
//! projection `z(l) = clip(y / (1 + l), lo, hi)`, for linear minimization
//! `z(t) = clip(-t g, lo, hi)`.

const BISECTION_STEPS: usize = 200;

/// Box-and-ball feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBall {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub radius_sq: f64,
}

fn norm_sq(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

impl BoxBall {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, radius_sq: f64) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi, radius_sq }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn clip_into(&self, out: &mut [f64], f: impl Fn(usize) -> f64) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = f(i).clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Smallest squared norm attainable inside the box.
    pub fn min_norm_sq(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| {
                let v = 0f64.clamp(l, h);
                v * v
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h) || self.min_norm_sq() > self.radius_sq
    }

    /// Euclidean projection of `y`. Always returns a point of the set when the set
    /// is nonempty.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; y.len()];
        self.clip_into(&mut z, |i| y[i]);
        if norm_sq(&z) <= self.radius_sq {
            return z;
        }
        let mut lo_mult = 0.0f64;
        let mut hi_mult = 1.0f64;
        loop {
            self.clip_into(&mut z, |i| y[i] / (1.0 + hi_mult));
            if norm_sq(&z) <= self.radius_sq || hi_mult > 1e300 {
                break;
            }
            lo_mult = hi_mult;
            hi_mult *= 2.0;
        }
        let mut best = z.clone();
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo_mult + hi_mult);
            if mid <= lo_mult || mid >= hi_mult {
                break;
            }
            self.clip_into(&mut z, |i| y[i] / (1.0 + mid));
            if norm_sq(&z) <= self.radius_sq {
                hi_mult = mid;
                best.copy_from_slice(&z);
            } else {
                lo_mult = mid;
            }
        }
        best
    }

    /// Lower bound on `min g^T z` over the set, from the Lagrangian dual of the
    /// ball constraint, together with a feasible point near the minimizer.
    pub fn linear_lower_bound(&self, g: &[f64]) -> (f64, Vec<f64>) {
        let dot = |z: &[f64]| g.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        // box-only minimizer, ties resolved toward zero
        let mut z: Vec<f64> = (0..g.len())
            .map(|i| {
                if g[i] > 0.0 {
                    self.lo[i]
                } else if g[i] < 0.0 {
                    self.hi[i]
                } else {
                    0f64.clamp(self.lo[i], self.hi[i])
                }
            })
            .collect();
        if norm_sq(&z) <= self.radius_sq {
            return (dot(&z), z);
        }
        // z(t) = clip(-t g) has nondecreasing norm in t; dual multiplier mu = 1 / (2t)
        let dual = |z: &[f64], t: f64| dot(z) + (norm_sq(z) - self.radius_sq) / (2.0 * t);
        let (mut t_lo, mut t_hi) = (0.0f64, 1.0f64);
        let mut bound = f64::NEG_INFINITY;
        let mut feasible = vec![0.0; g.len()];
        self.clip_into(&mut feasible, |_| 0.0);
        loop {
            self.clip_into(&mut z, |i| -t_hi * g[i]);
            bound = bound.max(dual(&z, t_hi));
            if norm_sq(&z) > self.radius_sq || t_hi > 1e300 {
                break;
            }
            feasible.copy_from_slice(&z);
            t_lo = t_hi;
            t_hi *= 2.0;
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (t_lo + t_hi);
            if mid <= t_lo || mid >= t_hi {
                break;
            }
            self.clip_into(&mut z, |i| -mid * g[i]);
            bound = bound.max(dual(&z, mid));
            if norm_sq(&z) <= self.radius_sq {
                t_lo = mid;
                feasible.copy_from_slice(&z);
            } else {
                t_hi = mid;
            }
        }
        (bound.min(dot(&feasible)), feasible)
    }
}

/// Projection of `y` onto `{z : lo <= z_i <= hi, ||z||^2 <= q}`.
///
/// The box must contain a point of the ball; this holds whenever `lo <= 0 <= hi`.
pub fn project_box_ball(y: &[f64], lo: f64, hi: f64, q: f64) -> Vec<f64> {
    let n = y.len();
    BoxBall::new(vec![lo; n], vec![hi; n], q).project(y)
}
