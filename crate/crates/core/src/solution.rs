//! Manufactured solutions and grid functions on the unit square.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sat::{BoundaryData2D, BoundaryKind};

/// `U = cos(k_x x + a) cos(k_y y + b) cos(ω t + c)`, which solves
/// `U_tt = U_xx + U_yy + F` with `F = (k_x² + k_y² − ω²) U`.
///
/// The one-dimensional variant drops the `y` factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolution {
    pub kx: f64,
    pub ky: f64,
    pub omega: f64,
    pub phase_x: f64,
    pub phase_y: f64,
    pub phase_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionChoice {
    /// Wavenumber 4 in both directions.
    #[default]
    Smooth,
    /// Wavenumber `10π`; needs much finer grids.
    HighFrequency,
}

impl std::str::FromStr for SolutionChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(SolutionChoice::Smooth),
            "high-frequency" => Ok(SolutionChoice::HighFrequency),
            other => Err(Error::Config(format!("unknown solution `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolutionChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolutionChoice::Smooth => "smooth",
            SolutionChoice::HighFrequency => "high-frequency",
        })
    }
}

impl ManufacturedSolution {
    pub fn new(k: f64, omega: f64) -> Self {
        Self { kx: k, ky: k, omega, phase_x: 1.0, phase_y: 2.0, phase_t: 3.0 }
    }

    /// `cos(4x+1) cos(4y+2) cos(4√2 t+3)`.
    pub fn smooth() -> Self {
        Self::new(4.0, 4.0 * std::f64::consts::SQRT_2)
    }

    /// `cos(10πx+1) cos(10πy+2) cos(10π√2 t+3)`.
    pub fn high_frequency() -> Self {
        let k = 10.0 * std::f64::consts::PI;
        Self::new(k, k * std::f64::consts::SQRT_2)
    }

    pub fn from_choice(choice: SolutionChoice) -> Self {
        match choice {
            SolutionChoice::Smooth => Self::smooth(),
            SolutionChoice::HighFrequency => Self::high_frequency(),
        }
    }

    /// The same profile in `x` with a frequency that makes the 1D problem
    /// source free.
    pub fn one_dimensional(k: f64) -> Self {
        Self { kx: k, ky: 0.0, omega: k, phase_x: 1.0, phase_y: 0.0, phase_t: 3.0 }
    }

    fn fx(&self, x: f64) -> f64 {
        (self.kx * x + self.phase_x).cos()
    }

    fn fy(&self, y: f64) -> f64 {
        (self.ky * y + self.phase_y).cos()
    }

    fn ft(&self, t: f64) -> f64 {
        (self.omega * t + self.phase_t).cos()
    }

    pub fn u(&self, x: f64, y: f64, t: f64) -> f64 {
        self.fx(x) * self.fy(y) * self.ft(t)
    }

    pub fn u_t(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.omega * self.fx(x) * self.fy(y) * (self.omega * t + self.phase_t).sin()
    }

    pub fn u_x(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.kx * (self.kx * x + self.phase_x).sin() * self.fy(y) * self.ft(t)
    }

    pub fn u_y(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.ky * self.fx(x) * (self.ky * y + self.phase_y).sin() * self.ft(t)
    }

    /// Multiplier `k_x² + k_y² − ω²` such that `F = multiplier · U`.
    pub fn forcing_factor(&self) -> f64 {
        self.kx * self.kx + self.ky * self.ky - self.omega * self.omega
    }

    pub fn forcing(&self, x: f64, y: f64, t: f64) -> f64 {
        self.forcing_factor() * self.u(x, y, t)
    }

    /// Whether the forcing vanishes identically (up to round-off in `ω`).
    pub fn is_source_free(&self) -> bool {
        self.forcing_factor().abs() <= 1e-12 * (self.omega * self.omega).max(1.0)
    }

    /// `k`-th time derivative of the temporal factor `cos(ωt + c)`.
    pub fn time_factor(&self, t: f64, k: u32) -> f64 {
        self.omega.powi(k as i32) * (self.omega * t + self.phase_t + k as f64 * std::f64::consts::FRAC_PI_2).cos()
    }

    /// Spatial part of the boundary data on the unit square. Data at time `t`
    /// is this profile times [`Self::time_factor`]`(t, 0)`. Dirichlet sides
    /// carry values, Neumann sides outward normal derivatives.
    pub fn boundary_profile(&self, kx: BoundaryKind, ky: BoundaryKind, grid: &Grid2D) -> BoundaryData2D {
        let xs = grid.xs();
        let ys = grid.ys();
        let (x1, y1) = (*xs.last().unwrap(), *ys.last().unwrap());
        let gx = |x: f64| self.fx(x);
        let dgx = |x: f64| -self.kx * (self.kx * x + self.phase_x).sin();
        let gy = |y: f64| self.fy(y);
        let dgy = |y: f64| -self.ky * (self.ky * y + self.phase_y).sin();
        let side_x = |xb: f64, outward: f64| -> Vec<f64> {
            ys.iter()
                .map(|&y| match kx {
                    BoundaryKind::Dirichlet => gx(xb) * gy(y),
                    BoundaryKind::Neumann => outward * dgx(xb) * gy(y),
                })
                .collect()
        };
        let side_y = |yb: f64, outward: f64| -> Vec<f64> {
            xs.iter()
                .map(|&x| match ky {
                    BoundaryKind::Dirichlet => gx(x) * gy(yb),
                    BoundaryKind::Neumann => outward * gx(x) * dgy(yb),
                })
                .collect()
        };
        BoundaryData2D { west: side_x(0.0, -1.0), east: side_x(x1, 1.0), south: side_y(0.0, -1.0), north: side_y(y1, 1.0) }
    }

    pub fn boundary_data(&self, kx: BoundaryKind, ky: BoundaryKind, grid: &Grid2D, t: f64) -> BoundaryData2D {
        self.boundary_profile(kx, ky, grid).scaled(self.time_factor(t, 0))
    }

    /// Spatial part of the 1D boundary data `(left, right)`.
    pub fn boundary_profile_1d(&self, kind: BoundaryKind, x1: f64) -> (f64, f64) {
        let dgx = |x: f64| -self.kx * (self.kx * x + self.phase_x).sin();
        match kind {
            BoundaryKind::Dirichlet => (self.fx(0.0), self.fx(x1)),
            BoundaryKind::Neumann => (-dgx(0.0), dgx(x1)),
        }
    }

    pub fn boundary_data_1d(&self, kind: BoundaryKind, x1: f64, t: f64) -> (f64, f64) {
        let (l, r) = self.boundary_profile_1d(kind, x1);
        let f = self.time_factor(t, 0);
        (l * f, r * f)
    }

    pub fn u_1d(&self, x: f64, t: f64) -> f64 {
        self.fx(x) * self.ft(t)
    }

    pub fn u_t_1d(&self, x: f64, t: f64) -> f64 {
        -self.omega * self.fx(x) * (self.omega * t + self.phase_t).sin()
    }

    pub fn forcing_1d(&self, x: f64, t: f64) -> f64 {
        (self.kx * self.kx - self.omega * self.omega) * self.u_1d(x, t)
    }
}

/// Square tensor grid `x_j = j h`, `y_i = i h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
}

impl Grid2D {
    pub fn unit_square(n: usize) -> Self {
        Self { nx: n, ny: n, h: 1.0 / (n - 1) as f64 }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| j as f64 * self.h).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|i| i as f64 * self.h).collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid function stored column by column: `values[j·ny + i]` is the value at
/// `(x_j, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction2D {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl GridFunction2D {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { nx, ny, values: vec![0.0; nx * ny] }
    }

    pub fn from_values(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch { expected: nx * ny, actual: values.len() });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.ny + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.ny..(j + 1) * self.ny]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.nx).map(|j| self.get(i, j)).collect()
    }

    /// `‖w‖_2D = (h² Σ |w_ij|²)^{1/2}`.
    pub fn norm_2d(&self, h: f64) -> f64 {
        (h * h * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `‖w_{i,:}‖_{1D,x}`.
    pub fn norm_1d_x(&self, i: usize, h: f64) -> f64 {
        (h * (0..self.nx).map(|j| self.get(i, j).powi(2)).sum::<f64>()).sqrt()
    }

    /// `‖w_{:,j}‖_{1D,y}`.
    pub fn norm_1d_y(&self, j: usize, h: f64) -> f64 {
        (h * self.column(j).iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// `‖u − U‖ = h ((u−U)ᵀ(u−U))^{1/2}`.
pub fn l2_error(u: &[f64], exact: &[f64], h: f64) -> Result<f64> {
    if u.len() != exact.len() {
        return Err(Error::DimensionMismatch { expected: exact.len(), actual: u.len() });
    }
    let sum: f64 = u.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(h * sum.sqrt())
}

/// Samples `U(·,·,t)` on the grid.
pub fn sample_solution(ms: &ManufacturedSolution, grid: &Grid2D, t: f64) -> GridFunction2D {
    sample_with(grid, |x, y| ms.u(x, y, t))
}

pub fn sample_velocity(ms: &ManufacturedSolution, grid: &Grid2D, t: f64) -> GridFunction2D {
    sample_with(grid, |x, y| ms.u_t(x, y, t))
}

pub fn sample_forcing(ms: &ManufacturedSolution, grid: &Grid2D, t: f64) -> GridFunction2D {
    sample_with(grid, |x, y| ms.forcing(x, y, t))
}

fn sample_with(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> GridFunction2D {
    let xs = grid.xs();
    let ys = grid.ys();
    let mut values = Vec::with_capacity(grid.len());
    for &x in &xs {
        for &y in &ys {
            values.push(f(x, y));
        }
    }
    GridFunction2D { nx: grid.nx, ny: grid.ny, values }
}
