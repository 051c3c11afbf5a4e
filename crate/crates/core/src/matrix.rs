//! Dense complex matrices.
//!
//! Everything in the crate runs on matrices of a few hundred rows at most,
//! so a plain row-major `Vec<Complex64>` with textbook O(n³) products is the
//! whole linear-algebra layer.

use crate::C64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix entry ({row},{col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {lhs_rows}x{lhs_cols} vs {rhs_rows}x{rhs_cols}")]
    DimensionMismatch {
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from row-major data, rejecting NaN/Inf entries.
    pub fn from_data(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, MatrixError> {
        assert_eq!(rows * cols, data.len(), "data length must be rows*cols");
        for (idx, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(MatrixError::NonFiniteEntry {
                    row: idx / cols,
                    col: idx % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn ensure_square(&self) -> Result<usize, MatrixError> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(MatrixError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "product dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| s * z).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// `self^n` by repeated multiplication (n is small everywhere we power).
    pub fn pow(&self, n: usize) -> Self {
        let dim = self.rows;
        assert!(self.is_square(), "pow requires a square matrix");
        let mut out = Self::identity(dim);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace requires a square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// `AB - BA`.
    pub fn commutator(&self, rhs: &Self) -> Self {
        self.mul(rhs).sub(&rhs.mul(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-abs entry together with its position.
    pub fn max_abs_entry(&self) -> (f64, (usize, usize)) {
        let mut best = (0.0, (0, 0));
        for r in 0..self.rows {
            for c in 0..self.cols {
                let a = self[(r, c)].norm();
                if a > best.0 {
                    best = (a, (r, c));
                }
            }
        }
        best
    }

    /// `max |(M·M* - I)_{jk}|`, the unitarity residual.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.rows;
        assert!(self.is_square());
        self.mul(&self.adjoint()).sub(&Self::identity(n)).max_abs()
    }

    /// Principal `size`×`size` leading block.
    pub fn leading_block(&self, size: usize) -> Self {
        assert!(size <= self.rows && size <= self.cols);
        Self::from_fn(size, size, |r, c| self[(r, c)])
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn product_and_trace() {
        let a = ComplexMatrix::from_fn(2, 2, |r, c_| c((r * 2 + c_) as f64, 0.0));
        let b = ComplexMatrix::identity(2);
        assert_eq!(a.mul(&b), a);
        assert_eq!(a.trace(), c(3.0, 0.0));
    }

    #[test]
    fn adjoint_conjugates() {
        let m = ComplexMatrix::from_data(1, 2, vec![c(1.0, 2.0), c(3.0, -4.0)]).unwrap();
        let a = m.adjoint();
        assert_eq!(a[(0, 0)], c(1.0, -2.0));
        assert_eq!(a[(1, 0)], c(3.0, 4.0));
    }

    #[test]
    fn rejects_non_finite() {
        let err = ComplexMatrix::from_data(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, MatrixError::NonFiniteEntry { row: 0, col: 1 });
    }

    #[test]
    fn commutator_of_commuting_is_zero() {
        let a = ComplexMatrix::from_fn(3, 3, |r, c_| {
            if r == c_ {
                c(r as f64 + 1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert_eq!(a.commutator(&a.pow(2)).max_abs(), 0.0);
    }
}
