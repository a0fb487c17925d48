//! Banded-plus-border storage for one-dimensional difference operators.
//!
//! A row is either an interior row, which applies the same centered stencil,
//! or a boundary row stored densely in one of two border blocks. The top
//! block starts at column 0; the bottom block ends at the last column.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedBorder {
    n: usize,
    top: Vec<Vec<f64>>,
    bottom: Vec<Vec<f64>>,
    bottom_start: usize,
    stencil: Vec<f64>,
    /// Row sums of the top rows, the stencil and the bottom rows, with sums
    /// that vanish up to rounding stored as exact zeros.
    sums: RowSums,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct RowSums {
    top: Vec<f64>,
    stencil: f64,
    bottom: Vec<f64>,
}

fn row_sum(row: &[f64]) -> f64 {
    let s: f64 = row.iter().sum();
    let size: f64 = row.iter().map(|c| c.abs()).sum();
    if s.abs() <= 64.0 * f64::EPSILON * size {
        0.0
    } else {
        s
    }
}

impl BandedBorder {
    /// Compresses a dense operator. Rows equal to `stencil` (centered, within
    /// `tol` relative to the stencil scale) are stored implicitly; the
    /// remaining leading and trailing rows become the border blocks.
    pub fn from_dense(dense: &DMatrix<f64>, stencil: &[f64], tol: f64) -> Result<Self> {
        let n = dense.nrows();
        if dense.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: dense.ncols() });
        }
        if stencil.len() % 2 == 0 {
            return Err(Error::Table("stencil length must be odd".into()));
        }
        let half = stencil.len() / 2;
        let scale = stencil.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let matches = |i: usize| -> bool {
            if i < half || i + half >= n {
                return false;
            }
            (0..n).all(|j| {
                let expected = if j + half >= i && j <= i + half { stencil[j + half - i] } else { 0.0 };
                (dense[(i, j)] - expected).abs() <= tol * scale
            })
        };
        let first = (0..n).find(|&i| matches(i));
        let last = (0..n).rev().find(|&i| matches(i));
        let (t, b_first) = match (first, last) {
            (Some(f), Some(l)) => {
                if let Some(bad) = (f..=l).find(|&i| !matches(i)) {
                    return Err(Error::Table(format!("row {bad} is neither interior nor border")));
                }
                (f, l + 1)
            }
            _ => (n / 2, n / 2),
        };
        let row_extent = |i: usize| -> Option<(usize, usize)> {
            let nz: Vec<usize> = (0..n).filter(|&j| dense[(i, j)] != 0.0).collect();
            nz.first().map(|&a| (a, *nz.last().unwrap()))
        };
        let top_cols = (0..t).filter_map(row_extent).map(|(_, b)| b + 1).max().unwrap_or(0);
        let bottom_start = (b_first..n).filter_map(row_extent).map(|(a, _)| a).min().unwrap_or(n);
        let top: Vec<Vec<f64>> = (0..t).map(|i| (0..top_cols).map(|j| dense[(i, j)]).collect()).collect();
        let bottom: Vec<Vec<f64>> = (b_first..n).map(|i| (bottom_start..n).map(|j| dense[(i, j)]).collect()).collect();
        let sums = RowSums {
            top: top.iter().map(|r| row_sum(r)).collect(),
            stencil: row_sum(stencil),
            bottom: bottom.iter().map(|r| row_sum(r)).collect(),
        };
        Ok(Self { n, top, bottom, bottom_start, stencil: stencil.to_vec(), sums })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stencil(&self) -> &[f64] {
        &self.stencil
    }

    pub fn top_rows(&self) -> usize {
        self.top.len()
    }

    pub fn bottom_rows(&self) -> usize {
        self.bottom.len()
    }

    /// Dense top block (row-major, each row starting at column 0).
    pub fn top_block(&self) -> &[Vec<f64>] {
        &self.top
    }

    /// Nonzero support of row `i`: starting column and coefficients.
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        let bottom_first = self.n - self.bottom.len();
        if i < self.top.len() {
            (0, &self.top[i])
        } else if i >= bottom_first {
            (self.bottom_start, &self.bottom[i - bottom_first])
        } else {
            (i - self.stencil.len() / 2, &self.stencil)
        }
    }

    /// Sum of the coefficients of row `i`; exactly zero when the row
    /// annihilates constants up to rounding.
    pub fn row_sum(&self, i: usize) -> f64 {
        let bottom_first = self.n - self.bottom.len();
        if i < self.top.len() {
            self.sums.top[i]
        } else if i >= bottom_first {
            self.sums.bottom[i - bottom_first]
        } else {
            self.sums.stencil
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (start, coeffs) = self.row(i);
        if j >= start && j < start + coeffs.len() {
            coeffs[j - start]
        } else {
            0.0
        }
    }

    /// `out = scale * A v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64], scale: f64) {
        assert_eq!(v.len(), self.n);
        assert_eq!(out.len(), self.n);
        let bottom_first = self.n - self.bottom.len();
        let half = self.stencil.len() / 2;
        for (i, row) in self.top.iter().enumerate() {
            out[i] = scale * centered_dot(row, &v[..row.len()], v[i], self.sums.top[i]);
        }
        for i in self.top.len()..bottom_first {
            out[i] = scale * centered_dot(&self.stencil, &v[i - half..=i + half], v[i], self.sums.stencil);
        }
        for (k, row) in self.bottom.iter().enumerate() {
            let i = bottom_first + k;
            out[i] = scale * centered_dot(row, &v[self.bottom_start..], v[i], self.sums.bottom[k]);
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (start, coeffs) = self.row(i);
            for (k, c) in coeffs.iter().enumerate() {
                m[(i, start + k)] = *c;
            }
        }
        m
    }
}

/// `Σ a_k b_k` evaluated as `Σ a_k (b_k − c) + c·sum` with `sum = Σ a_k`.
///
/// Difference stencils annihilate constants, but their rounded coefficient
/// sum does not vanish. Applied to a smooth field and scaled by `1/h²`, that
/// residue acts like a small spectral shift whose phase error grows in time.
/// Subtracting the center value and using the snapped `sum` removes it.
#[inline]
pub(crate) fn centered_dot(a: &[f64], b: &[f64], c: f64, sum: f64) -> f64 {
    let acc: f64 = a.iter().zip(b).map(|(x, y)| x * (y - c)).sum();
    acc + sum * c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = -2.0;
            if i > 0 {
                m[(i, i - 1)] = 1.0;
            }
            if i + 1 < n {
                m[(i, i + 1)] = 1.0;
            }
        }
        m[(0, 0)] = -1.0;
        m[(n - 1, n - 1)] = -1.0;
        m
    }

    #[test]
    fn round_trips_dense() {
        let d = laplacian(9);
        let b = BandedBorder::from_dense(&d, &[1.0, -2.0, 1.0], 0.0).unwrap();
        assert_eq!(b.top_rows(), 1);
        assert_eq!(b.bottom_rows(), 1);
        assert_eq!(b.to_dense(), d);
        assert_eq!(b.get(0, 1), 1.0);
        assert_eq!(b.get(4, 7), 0.0);
    }

    #[test]
    fn apply_matches_dense_product() {
        let mut d = laplacian(12);
        d[(0, 3)] = 0.25;
        d[(11, 8)] = 0.25;
        d[(1, 0)] = 0.5;
        let b = BandedBorder::from_dense(&d, &[1.0, -2.0, 1.0], 0.0).unwrap();
        let v: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut out = vec![0.0; 12];
        b.apply(&v, &mut out, 2.0);
        let expected = &d * nalgebra::DVector::from_vec(v) * 2.0;
        for i in 0..12 {
            assert!((out[i] - expected[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_interior_gap() {
        let mut d = laplacian(10);
        d[(5, 5)] = -3.0;
        assert!(BandedBorder::from_dense(&d, &[1.0, -2.0, 1.0], 0.0).is_err());
    }
}
