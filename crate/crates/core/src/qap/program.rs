//! The real-valued bounded-integer program behind quantization-aware precoding.
//!
//! With `a = vec(P)` and `G = H^H H`, the MSE objective (up to the constant
//! `K (|b|^2 N0 + 1)` and the factor `|b|^2`) is
//!
//! ```text
//! tr(P^H G P - (1/b*) H P - ((1/b*) H P)^H) = a^H (I_K (x) G) a - h^T a - (h^T a)^*
//! ```
//!
//! with `h = vec((1/b*) H^T)`. Stacking real and imaginary parts gives
//! `a_R^T V_R a_R - 2 c_R^T a_R` where `V_R` is the usual `[[Re, -Im], [Im, Re]]`
//! embedding of `I_K (x) G` and `c_R = [Re h; -Im h]`, i.e. the embedding of
//! `conj(h) = vec(H^H) / b`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, shape, Result};
use crate::matrix::ComplexMatrix;
use crate::model::SystemInstance;
use crate::precoders::Beta;
use crate::quantizer::QuantizerSpec;

/// Absolute slack allowed on the power constraint `||a_R||^2 <= q`.
pub const POWER_TOLERANCE: f64 = 1e-9;

/// `min a^T V a - 2 c^T a` subject to `||a||^2 <= q` and
/// `a = delta (x - (L-1)/2)`, `x` integer in `[0, L-1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealQuadraticProgram {
    v: DMatrix<f64>,
    c: DVector<f64>,
    power: f64,
    delta: f64,
    levels: usize,
}

impl RealQuadraticProgram {
    /// Validates symmetry (1e-12 relative), positive semidefiniteness (eigenvalues
    /// above -1e-9 relative) and the scalar parameters.
    pub fn new(v: DMatrix<f64>, c: DVector<f64>, power: f64, delta: f64, levels: usize) -> Result<Self> {
        let n = c.len();
        if v.shape() != (n, n) {
            return Err(shape(format!("{n}x{n} quadratic term"), format!("{}x{}", v.nrows(), v.ncols())));
        }
        if n == 0 {
            return Err(invalid("program needs at least one variable"));
        }
        if v.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("program data must be finite"));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(invalid(format!("power budget must be positive, got {power}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(invalid(format!("step size must be positive, got {delta}")));
        }
        if levels < 2 {
            return Err(invalid(format!("need at least 2 levels, got {levels}")));
        }
        let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let asym = (&v - v.transpose()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if asym > 1e-12 * scale {
            return Err(invalid(format!("quadratic term is not symmetric (max deviation {asym:e})")));
        }
        let min_eig = SymmetricEigen::new(v.clone()).eigenvalues.min();
        if min_eig < -1e-9 * scale {
            return Err(invalid(format!("quadratic term is not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        Ok(Self {
            v,
            c,
            power,
            delta,
            levels,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// `(L - 1) / 2`.
    pub fn center(&self) -> f64 {
        (self.levels as f64 - 1.0) / 2.0
    }

    pub fn label(&self, index: usize) -> f64 {
        self.delta * (index as f64 - self.center())
    }

    /// Index of the label closest to zero (the upper one on ties).
    pub fn zero_index(&self) -> usize {
        self.levels / 2
    }

    pub fn min_label_sq(&self) -> f64 {
        let l = self.label(self.zero_index());
        l * l
    }

    /// `a^T V a - 2 c^T a`.
    pub fn objective(&self, a: &[f64]) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for i in 0..n {
            let row: f64 = a.iter().enumerate().map(|(j, x)| self.v[(i, j)] * x).sum();
            total += a[i] * (row - 2.0 * self.c[i]);
        }
        total
    }

    pub fn labels_of(&self, x: &[usize]) -> Vec<f64> {
        x.iter().map(|&z| self.label(z)).collect()
    }

    /// Power of the smallest-norm lattice point; above `q` the program is infeasible.
    pub fn min_lattice_power(&self) -> f64 {
        self.dim() as f64 * self.min_label_sq()
    }

    /// Every squared label is an integer multiple of this quantum: `Δ²/4` for
    /// even `L` (odd half-steps), `Δ²` for odd `L`.
    pub fn norm_quantum(&self) -> f64 {
        if self.levels.is_multiple_of(2) {
            self.delta * self.delta / 4.0
        } else {
            self.delta * self.delta
        }
    }

    /// Largest `||a||^2` over lattice points within the power budget, or `None`
    /// when no point fits. Falls back to `q` when the norm grid is too fine to
    /// tabulate.
    pub fn max_attainable_power(&self) -> Option<f64> {
        if self.min_lattice_power() > self.power + POWER_TOLERANCE {
            return None;
        }
        const WORK_LIMIT: f64 = 5e7;
        let u = self.norm_quantum();
        let top = ((self.power + POWER_TOLERANCE) / u + 1e-9).floor();
        let n = self.dim();
        if top * (n * self.levels) as f64 > WORK_LIMIT {
            return Some(self.power);
        }
        let top = top as usize;
        let mut steps: Vec<usize> = (0..self.levels)
            .map(|z| (self.label(z) * self.label(z) / u).round() as usize)
            .filter(|&m| m <= top)
            .collect();
        steps.sort_unstable();
        steps.dedup();
        let mut reach = vec![false; top + 1];
        reach[0] = true;
        for _ in 0..n {
            let mut next = vec![false; top + 1];
            for s in (0..=top).filter(|&s| reach[s]) {
                for &m in steps.iter().take_while(|&&m| s + m <= top) {
                    next[s + m] = true;
                }
            }
            reach = next;
        }
        let best = (0..=top).rev().find(|&s| reach[s])?;
        Some((best as f64 * u * (1.0 + 1e-12)).min(self.power + POWER_TOLERANCE))
    }

    pub fn is_power_feasible(&self, a: &[f64]) -> bool {
        a.iter().map(|x| x * x).sum::<f64>() <= self.power + POWER_TOLERANCE
    }
}

/// A lattice point and its label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePoint {
    pub x: Vec<usize>,
    pub a: Vec<f64>,
}

impl LatticePoint {
    pub fn new(prog: &RealQuadraticProgram, x: Vec<usize>) -> Self {
        let a = prog.labels_of(&x);
        Self { x, a }
    }

    pub fn power(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum()
    }
}

/// `[Re vec(P); Im vec(P)]`.
pub fn embed_precoder(p: &ComplexMatrix) -> Vec<f64> {
    let a = p.vec();
    a.iter().map(|z| z.re).chain(a.iter().map(|z| z.im)).collect()
}

/// Inverse of [`embed_precoder`] for an M x K precoder.
pub fn reshape_precoder(a_r: &[f64], antennas: usize, users: usize) -> Result<ComplexMatrix> {
    let mk = antennas * users;
    if a_r.len() != 2 * mk {
        return Err(shape(format!("{} real entries", 2 * mk), format!("{}", a_r.len())));
    }
    ComplexMatrix::from_fn(antennas, users, |m, k| {
        let idx = m + antennas * k;
        Complex64::new(a_r[idx], a_r[mk + idx])
    })
}

/// Builds the program for fixed `beta` with the lattice of `spec`.
pub fn build_real_program(inst: &SystemInstance, beta: Beta, spec: &QuantizerSpec) -> Result<RealQuadraticProgram> {
    let b = beta.value();
    if b.norm_sqr() == 0.0 || !b.re.is_finite() || !b.im.is_finite() {
        return Err(invalid("beta must be finite and nonzero"));
    }
    let (m, k) = (inst.antennas(), inst.users());
    let h = inst.channel().as_dmatrix();
    let gram = h.adjoint() * h;
    let mk = m * k;
    let mut v = DMatrix::<f64>::zeros(2 * mk, 2 * mk);
    for blk in 0..k {
        let off = blk * m;
        for i in 0..m {
            for j in 0..m {
                let g = gram[(i, j)];
                v[(off + i, off + j)] = g.re;
                v[(mk + off + i, mk + off + j)] = g.re;
                v[(off + i, mk + off + j)] = -g.im;
                v[(mk + off + i, off + j)] = g.im;
            }
        }
    }
    // conj(h) = vec(H^H) / b
    let hh = h.adjoint();
    let inv_b = Complex64::new(1.0, 0.0) / b;
    let mut c = DVector::<f64>::zeros(2 * mk);
    for (idx, z) in hh.iter().enumerate() {
        let w = z * inv_b;
        c[idx] = w.re;
        c[mk + idx] = w.im;
    }
    // exact symmetry: the Gram matrix is Hermitian only up to rounding
    let v = (&v + v.transpose()) * 0.5;
    RealQuadraticProgram::new(v, c, inst.power(), spec.delta(), spec.levels())
}

/// `tr(P^H H^H H P - (1/b*) H P - ((1/b*) H P)^H)`, evaluated with complex matrices.
pub fn trace_objective(inst: &SystemInstance, p: &ComplexMatrix, beta: Beta) -> Result<f64> {
    inst.check_precoder(p)?;
    let h = inst.channel().as_dmatrix();
    let p = p.as_dmatrix();
    let hp = h * p;
    let scaled = &hp * (Complex64::new(1.0, 0.0) / beta.value().conj());
    let total = (hp.adjoint() * &hp - &scaled - scaled.adjoint()).trace();
    Ok(total.re)
}

/// `a^H (I_K (x) H^H H) a - h^T a - (h^T a)^*` with `a = vec(P)`, `h = vec((1/b*) H^T)`,
/// evaluated through an explicit Kronecker product.
pub fn vector_objective(inst: &SystemInstance, p: &ComplexMatrix, beta: Beta) -> Result<f64> {
    inst.check_precoder(p)?;
    let h = inst.channel().as_dmatrix();
    let k = inst.users();
    let kron = DMatrix::<Complex64>::identity(k, k).kronecker(&(h.adjoint() * h));
    let a = DVector::from_vec(p.vec());
    let hvec = DVector::from_iterator(
        h.len(),
        h.transpose().iter().map(|z| z / beta.value().conj()),
    );
    let quad = (a.adjoint() * &kron * &a)[(0, 0)];
    let lin = (hvec.transpose() * &a)[(0, 0)];
    Ok((quad - lin - lin.conj()).re)
}
