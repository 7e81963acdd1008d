//! Symmetric uniform scalar quantizer.
//!
//! Labels sit at `delta * (z - (L - 1) / 2)` for `z = 0..L`, decision thresholds at
//! `delta * (z - L / 2)` for `z = 1..L`, with `-inf` and `+inf` as the outer
//! thresholds. Cells are half-open, `[t_z, t_{z+1})`, so with an even level count an
//! input of exactly zero maps to `+delta / 2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::ComplexMatrix;

/// Uniform quantizer with `levels` labels and step `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerSpec {
    levels: usize,
    delta: f64,
    labels: Vec<f64>,
    /// `levels + 1` entries, infinite at both ends.
    thresholds: Vec<f64>,
}

impl QuantizerSpec {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Bits per real dimension, `log2(L)`.
    pub fn bits(&self) -> f64 {
        (self.levels as f64).log2()
    }

    /// Offset `(L - 1) / 2` mapping lattice indices to labels.
    pub fn center(&self) -> f64 {
        (self.levels as f64 - 1.0) / 2.0
    }

    /// Smallest label magnitude: `delta / 2` for even L, zero for odd L.
    pub fn min_abs_label(&self) -> f64 {
        self.labels.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_label(&self) -> f64 {
        self.labels[self.levels - 1]
    }

    /// Label for lattice index `z`.
    pub fn label(&self, z: usize) -> f64 {
        self.labels[z]
    }

    /// Cell index of `x`.
    pub fn index_of(&self, x: f64) -> Result<usize> {
        if !x.is_finite() {
            return Err(invalid(format!("quantizer input must be finite, got {x}")));
        }
        let interior = &self.thresholds[1..self.levels];
        Ok(interior.partition_point(|&t| t <= x))
    }

    /// Whether `x` coincides with one of the labels.
    pub fn is_label(&self, x: f64) -> bool {
        self.labels.contains(&x)
    }
}

/// Builds the quantizer for `levels >= 2` and `delta > 0`.
pub fn make_quantizer(levels: usize, delta: f64) -> Result<QuantizerSpec> {
    if levels < 2 {
        return Err(invalid(format!("quantizer needs at least 2 levels, got {levels}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid(format!("quantizer step must be positive, got {delta}")));
    }
    let half_span = (levels as f64 - 1.0) / 2.0;
    let labels = (0..levels).map(|z| delta * (z as f64 - half_span)).collect();
    let mut thresholds = Vec::with_capacity(levels + 1);
    thresholds.push(f64::NEG_INFINITY);
    for z in 1..levels {
        thresholds.push(delta * (z as f64 - levels as f64 / 2.0));
    }
    thresholds.push(f64::INFINITY);
    Ok(QuantizerSpec {
        levels,
        delta,
        labels,
        thresholds,
    })
}

pub fn quantize_scalar(spec: &QuantizerSpec, x: f64) -> Result<f64> {
    Ok(spec.labels[spec.index_of(x)?])
}

/// Entrywise `Q(Re w) + j Q(Im w)`.
pub fn quantize_complex_matrix(spec: &QuantizerSpec, w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let entries = w
        .to_row_major()
        .into_iter()
        .map(|z| Ok(Complex64::new(quantize_scalar(spec, z.re)?, quantize_scalar(spec, z.im)?)))
        .collect::<Result<Vec<_>>>()?;
    ComplexMatrix::from_row_major(w.rows(), w.cols(), &entries)
}

/// Zero-mean Gaussian source, variance per real dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSource {
    variance: f64,
}

impl GaussianSource {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(invalid(format!("source variance must be positive, got {variance}")));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Result of the step-size search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDesign {
    pub delta: f64,
    pub distortion: f64,
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// `P(a <= U < b)` for a standard normal `U`, computed on the tail side that keeps precision.
fn std_normal_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (libm::erfc(a / SQRT_2) - libm::erfc(b / SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b / SQRT_2) - libm::erfc(-a / SQRT_2))
    } else {
        1.0 - 0.5 * libm::erfc(-a / SQRT_2) - 0.5 * libm::erfc(b / SQRT_2)
    }
}

fn times_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        x * std_normal_pdf(x)
    }
}

/// Mean squared error `E[(X - Q(X))^2]` of a `levels`-level quantizer with step
/// `delta` on `X ~ N(0, variance)`, summed cell by cell in closed form.
pub fn gaussian_distortion(levels: usize, delta: f64, source: GaussianSource) -> Result<f64> {
    let sigma = source.std_dev();
    let spec = make_quantizer(levels, delta / sigma)?;
    let mut total = 0.0;
    for z in 0..levels {
        let (a, b) = (spec.thresholds[z], spec.thresholds[z + 1]);
        let label = spec.labels[z];
        let mass = std_normal_mass(a, b);
        let first = std_normal_pdf(a) - std_normal_pdf(b);
        let second = mass + times_pdf(a) - times_pdf(b);
        total += second - 2.0 * label * first + label * label * mass;
    }
    Ok(source.variance() * total)
}

const GOLDEN_TOLERANCE: f64 = 1e-8;

/// Step size minimizing the Gaussian distortion, by golden-section search over
/// `[1e-3 sigma, 10 sigma]`.
pub fn optimize_step_size(levels: usize, source: GaussianSource) -> Result<StepDesign> {
    if levels < 2 {
        return Err(invalid(format!("quantizer needs at least 2 levels, got {levels}")));
    }
    let sigma = source.std_dev();
    let unit = GaussianSource { variance: 1.0 };
    let cost = |d: f64| gaussian_distortion(levels, d, unit).expect("validated step");
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (1e-3, 10.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while hi - lo > GOLDEN_TOLERANCE * 0.5 * (hi + lo) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = cost(x2);
        }
    }
    let unit_delta = 0.5 * (lo + hi);
    Ok(StepDesign {
        delta: sigma * unit_delta,
        distortion: source.variance() * cost(unit_delta),
    })
}
