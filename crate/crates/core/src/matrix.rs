//! Dense complex matrices.
//!
//! [`ComplexMatrix`] is a thin validated wrapper over `nalgebra::DMatrix<Complex64>`.
//! Every constructor rejects non-finite entries, so downstream code can assume all
//! values are finite.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};

/// Dense complex-valued matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(shape(
                format!("{} entries for {rows}x{cols}", rows * cols),
                format!("{} entries", entries.len()),
            ));
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let cplx: Vec<Complex64> = entries.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_row_major(rows, cols, &cplx)
    }

    pub fn from_dmatrix(inner: DMatrix<Complex64>) -> Result<Self> {
        if let Some(bad) = inner.iter().find(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self { inner })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<Complex64> {
        self.inner
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let (r, c) = self.shape();
        (0..r)
            .flat_map(|i| (0..c).map(move |j| (i, j)))
            .map(|(i, j)| self.inner[(i, j)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &ComplexMatrix) -> Result<Self> {
        if self.cols() != rhs.rows() {
            return Err(shape(
                format!("rhs with {} rows", self.cols()),
                format!("{}x{}", rhs.rows(), rhs.cols()),
            ));
        }
        Ok(Self {
            inner: &self.inner * &rhs.inner,
        })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            inner: self.inner.map(|z| z * factor),
        }
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace(&self) -> Complex64 {
        self.inner.trace()
    }

    pub fn map(&self, f: impl FnMut(Complex64) -> Complex64) -> Result<Self> {
        Self::from_dmatrix(self.inner.map(f))
    }

    pub fn is_zero(&self) -> bool {
        self.inner.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// Column-stacking vectorization, `vec(A)`.
    pub fn vec(&self) -> Vec<Complex64> {
        self.inner.iter().copied().collect()
    }

    pub(crate) fn expect_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        if self.shape() != (rows, cols) {
            return Err(Error::Shape {
                expected: format!("{what} of shape {rows}x{cols}"),
                got: format!("{}x{}", self.rows(), self.cols()),
            });
        }
        Ok(())
    }
}

/// Serialized form: separate real and imaginary planes in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&ComplexMatrix> for ComplexMatrixDoc {
    fn from(m: &ComplexMatrix) -> Self {
        let entries = m.to_row_major();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            re: entries.iter().map(|z| z.re).collect(),
            im: entries.iter().map(|z| z.im).collect(),
        }
    }
}

impl TryFrom<&ComplexMatrixDoc> for ComplexMatrix {
    type Error = Error;

    fn try_from(doc: &ComplexMatrixDoc) -> Result<Self> {
        if doc.re.len() != doc.im.len() {
            return Err(shape(
                format!("{} imaginary parts", doc.re.len()),
                format!("{}", doc.im.len()),
            ));
        }
        let entries: Vec<Complex64> = doc
            .re
            .iter()
            .zip(&doc.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        ComplexMatrix::from_row_major(doc.rows, doc.cols, &entries)
    }
}
