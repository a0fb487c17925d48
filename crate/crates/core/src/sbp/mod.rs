//! Diagonal-norm summation-by-parts approximations of `d²/dx²`.
//!
//! An operator is stored as `D = H⁻¹(−M + BS)` with `B = diag(−1, 0, …, 0, 1)`
//! and `S` nonzero only in its first and last rows. Internally every matrix is
//! kept at unit spacing (`H/h`, `hM`, `hS`, `h²D`) and rescaled on access.

pub mod tables;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::banded::BandedBorder;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
pub use tables::CoefficientTable;

/// Interior order `2p` of a supported operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Order {
    Second,
    Fourth,
    Sixth,
}

impl Order {
    pub const ALL: [Order; 3] = [Order::Second, Order::Fourth, Order::Sixth];

    pub fn from_interior(order: usize) -> Result<Self> {
        match order {
            2 => Ok(Order::Second),
            4 => Ok(Order::Fourth),
            6 => Ok(Order::Sixth),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    /// `2p`.
    pub fn interior(self) -> usize {
        match self {
            Order::Second => 2,
            Order::Fourth => 4,
            Order::Sixth => 6,
        }
    }

    /// `p`, the order of the boundary truncation error. Also the half width of
    /// the interior stencil.
    pub fn boundary(self) -> usize {
        self.interior() / 2
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.interior())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbpD2Operator {
    order: Order,
    grid: Grid1D,
    norm: Vec<f64>,
    m: BandedBorder,
    d: BandedBorder,
    s_first: Vec<f64>,
    closure_rows: usize,
}

/// Smallest grid admitted for `order`: the two closures may not share rows.
pub fn min_points(order: Order) -> usize {
    let rows = CoefficientTable::builtin(order.interior()).map(|t| t.closure_rows).unwrap_or(1);
    2 * rows + 1
}

pub fn build_sbp_d2(order: usize, n: usize, h: f64) -> Result<SbpD2Operator> {
    let order = Order::from_interior(order)?;
    let table = CoefficientTable::builtin(order.interior())?;
    SbpD2Operator::from_table(&table, Grid1D::new(n.max(2), h)?, n)
}

impl SbpD2Operator {
    pub fn new(order: Order, grid: Grid1D) -> Result<Self> {
        let table = CoefficientTable::builtin(order.interior())?;
        Self::from_table(&table, grid, grid.n())
    }

    pub fn from_table(table: &CoefficientTable, grid: Grid1D, n: usize) -> Result<Self> {
        let order = Order::from_interior(table.order)?;
        let min = 2 * table.closure_rows + 1;
        if n < min || n < table.closure_cols {
            return Err(Error::GridTooSmall { order: order.interior(), n, min: min.max(table.closure_cols) });
        }
        let r = table.closure_rows;
        let half = order.boundary();

        let mut norm = vec![1.0; n];
        for (i, &w) in table.norm.iter().enumerate() {
            norm[i] = w;
            norm[n - 1 - i] = w;
        }

        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in r..n - r {
            for (k, &a) in table.interior.iter().enumerate() {
                let j = i + k;
                if j >= half && j - half < n {
                    m[(i, j - half)] = -a;
                }
            }
        }
        for (i, row) in table.m_rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
                m[(n - 1 - i, n - 1 - j)] = v;
            }
        }

        let s_first = table.boundary_derivative.clone();
        let mut d = -m.clone();
        for (j, &s) in s_first.iter().enumerate() {
            d[(0, j)] -= s;
            d[(n - 1, n - 1 - j)] -= s;
        }
        for i in 0..n {
            let w = norm[i];
            d.row_mut(i).iter_mut().for_each(|v| *v /= w);
        }

        let neg: Vec<f64> = table.interior.iter().map(|a| -a).collect();
        Ok(Self {
            order,
            grid,
            norm,
            m: BandedBorder::from_dense(&m, &neg, 1e-13)?,
            d: BandedBorder::from_dense(&d, &table.interior, 1e-13)?,
            s_first,
            closure_rows: r,
        })
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn closure_rows(&self) -> usize {
        self.closure_rows
    }

    /// Central stencil coefficients `a_0..a_{2p}` of `h²D`.
    pub fn interior_coeffs(&self) -> &[f64] {
        self.d.stencil()
    }

    /// Diagonal of `H/h` (the norm `P` at unit spacing).
    pub fn norm_unit(&self) -> &[f64] {
        &self.norm
    }

    /// Diagonal of `H`.
    pub fn norm_diag(&self) -> Vec<f64> {
        self.norm.iter().map(|w| w * self.h()).collect()
    }

    /// `hM`, banded.
    pub fn m_unit(&self) -> &BandedBorder {
        &self.m
    }

    /// `h²D`, banded.
    pub fn d_unit(&self) -> &BandedBorder {
        &self.d
    }

    /// Leading coefficients of the first row of `hS`.
    pub fn s_first_unit(&self) -> &[f64] {
        &self.s_first
    }

    /// Last row of `hS` as `(start column, coefficients)`.
    pub fn s_last_unit(&self) -> (usize, Vec<f64>) {
        let n = self.n();
        let k = self.s_first.len();
        let coeffs = (0..k).map(|j| -self.s_first[k - 1 - j]).collect();
        (n - k, coeffs)
    }

    pub fn m_dense(&self) -> DMatrix<f64> {
        self.m.to_dense() / self.h()
    }

    pub fn d_dense(&self) -> DMatrix<f64> {
        self.d.to_dense() / (self.h() * self.h())
    }

    /// Dense `S` (only the first and last rows are nonzero).
    pub fn s_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut s = DMatrix::zeros(n, n);
        for (j, &v) in self.s_first.iter().enumerate() {
            s[(0, j)] = v / self.h();
        }
        let (start, last) = self.s_last_unit();
        for (k, &v) in last.iter().enumerate() {
            s[(n - 1, start + k)] = v / self.h();
        }
        s
    }
}

/// `D v`.
pub fn apply_d2(op: &SbpD2Operator, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != op.n() {
        return Err(Error::DimensionMismatch { expected: op.n(), actual: v.len() });
    }
    let mut out = vec![0.0; v.len()];
    op.d.apply(v, &mut out, 1.0 / (op.h() * op.h()));
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactnessRow {
    pub degree: usize,
    pub interior_residual: f64,
    pub boundary_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SbpPropertyReport {
    pub order: usize,
    pub n: usize,
    pub nonpositive_norm_entries: usize,
    pub m_asymmetry: f64,
    pub m_max_abs: f64,
    /// Smallest eigenvalue of `sym(hM)`.
    pub m_min_eigenvalue: f64,
    pub m_norm2: f64,
    pub stencil_symmetric: bool,
    pub stencil_sum: f64,
    /// Deviation of `HD + M` from the pattern `BS`.
    pub b_pattern_residual: f64,
    pub s_first_residual: f64,
    pub exactness: Vec<ExactnessRow>,
    pub interior_exact_degree: usize,
    pub boundary_exact_degree: usize,
    pub failures: Vec<String>,
}

impl SbpPropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const EIG_TOL: f64 = 1e-10;
pub const EXACTNESS_TOL: f64 = 1e-8;

pub fn verify_sbp_properties(op: &SbpD2Operator) -> SbpPropertyReport {
    let n = op.n();
    let p = op.order.boundary();
    let h = op.h();
    let mut failures = Vec::new();

    let nonpositive = op.norm.iter().filter(|&&w| !(w > 0.0)).count();
    if nonpositive > 0 {
        failures.push(format!("{nonpositive} non-positive norm entries"));
    }

    let m = op.m.to_dense();
    let m_max_abs = m.amax();
    let m_asymmetry = (&m - m.transpose()).amax();
    if m_asymmetry > SYMMETRY_TOL * m_max_abs {
        failures.push(format!("M not symmetric: {m_asymmetry:e}"));
    }
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let m_min_eigenvalue = eig.min();
    let m_norm2 = eig.amax();
    if m_min_eigenvalue < -EIG_TOL {
        failures.push(format!("sym(M) indefinite: eigmin {m_min_eigenvalue:e}"));
    }

    let a = op.interior_coeffs();
    let stencil_symmetric = (0..a.len()).all(|j| a[j] == a[a.len() - 1 - j]);
    let stencil_sum: f64 = a.iter().sum();
    if !stencil_symmetric || stencil_sum.abs() > 1e-13 {
        failures.push("interior stencil not symmetric or not consistent".into());
    }

    // H D + M must equal B S: zero everywhere except -S_first / +S_last.
    let d = op.d.to_dense();
    let mut r = &m + DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&op.norm)) * d;
    for (j, &s) in op.s_first.iter().enumerate() {
        r[(0, j)] += s;
    }
    let (start, last) = op.s_last_unit();
    for (k, &s) in last.iter().enumerate() {
        r[(n - 1, start + k)] -= s;
    }
    let b_pattern_residual = r.amax();
    if b_pattern_residual > SYMMETRY_TOL * m_max_abs.max(1.0) {
        failures.push(format!("decomposition D = H^-1(-M + BS) violated: {b_pattern_residual:e}"));
    }

    let s_first_residual = (0..=p)
        .map(|k| {
            let value: f64 = op.s_first.iter().enumerate().map(|(j, s)| s / h * (j as f64 * h).powi(k as i32)).sum();
            let exact = if k == 1 { 1.0 } else { 0.0 };
            (value - exact).abs()
        })
        .fold(0.0, f64::max);
    if s_first_residual > EXACTNESS_TOL {
        failures.push(format!("boundary derivative inexact: {s_first_residual:e}"));
    }

    let grid = op.grid;
    let closure = op.closure_rows;
    let interior_exact_degree = 2 * p + 1;
    let boundary_exact_degree = p + 1;
    let mut exactness = Vec::new();
    for k in 0..=2 * p + 2 {
        let v: Vec<f64> = (0..n).map(|i| grid.x(i).powi(k as i32)).collect();
        let dv = apply_d2(op, &v).expect("length matches");
        let second = |x: f64| if k >= 2 { (k * (k - 1)) as f64 * x.powi(k as i32 - 2) } else { 0.0 };
        let scale = (0..n).map(|i| second(grid.x(i)).abs()).fold(1.0, f64::max);
        let mut interior_residual = 0.0f64;
        let mut boundary_residual = 0.0f64;
        for i in 0..n {
            let res = (dv[i] - second(grid.x(i))).abs() / scale;
            if i < closure || i >= n - closure {
                boundary_residual = boundary_residual.max(res);
            } else {
                interior_residual = interior_residual.max(res);
            }
        }
        if k <= interior_exact_degree && interior_residual > EXACTNESS_TOL {
            failures.push(format!("interior rows inexact for degree {k}: {interior_residual:e}"));
        }
        if k <= boundary_exact_degree && boundary_residual > EXACTNESS_TOL {
            failures.push(format!("boundary rows inexact for degree {k}: {boundary_residual:e}"));
        }
        exactness.push(ExactnessRow { degree: k, interior_residual, boundary_residual });
    }

    SbpPropertyReport {
        order: op.order.interior(),
        n,
        nonpositive_norm_entries: nonpositive,
        m_asymmetry,
        m_max_abs,
        m_min_eigenvalue,
        m_norm2,
        stencil_symmetric,
        stencil_sum,
        b_pattern_residual,
        s_first_residual,
        exactness,
        interior_exact_degree,
        boundary_exact_degree,
        failures,
    }
}
