//! Boundary system `C(s̃) Σ = h^{p+2} T_C` of a half-line closure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::{decay_factor, CharacteristicProblem};
use crate::error::{Error, Result};
use crate::sat::SemiDiscretization1D;

/// Left closure of a one-dimensional semi-discretization at unit spacing.
///
/// Rows `0..r` differ from the interior stencil. With half-width `l` the
/// unknowns are `ζ̂_0..ζ̂_{d-1}` and `σ_1..σ_l`, `d = r − l`, and
/// `ζ̂_{d+j} = Σ_m σ_m κ_m^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureModel {
    rows: Vec<Vec<f64>>,
    cp: CharacteristicProblem,
    p: usize,
    t_c: Vec<f64>,
}

impl ClosureModel {
    pub fn from_semidisc(sd: &SemiDiscretization1D) -> Result<Self> {
        let q = sd.q();
        let rows = q.top_block().to_vec();
        let cp = CharacteristicProblem::new(q.stencil())?;
        let p = sd.operator().order().boundary();
        if rows.len() < cp.l() {
            return Err(Error::Table(format!("closure of {} rows is narrower than the stencil", rows.len())));
        }
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        if width + cp.l() >= sd.n() {
            return Err(Error::GridTooSmall { order: sd.operator().order().interior(), n: sd.n(), min: width + cp.l() + 1 });
        }
        let t_c = truncation_coefficients(&rows, p);
        Ok(Self { rows, cp, p, t_c })
    }

    /// Number of closure rows, the size of `C`.
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn l(&self) -> usize {
        self.cp.l()
    }

    pub fn d(&self) -> usize {
        self.size() - self.l()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn problem(&self) -> &CharacteristicProblem {
        &self.cp
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `T_C`, the leading boundary truncation coefficients `a_i`.
    pub fn t_c(&self) -> &[f64] {
        &self.t_c
    }

    /// Index of the last nonzero entry of `T_C`.
    pub fn k(&self) -> Option<usize> {
        let scale = self.t_c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.t_c.iter().rposition(|v| v.abs() > 1e-12 * scale.max(1.0))
    }

    /// `C(s̃)` for given admissible roots.
    pub fn matrix_with_roots(&self, s: Complex64, kappa: &[Complex64]) -> DMatrix<Complex64> {
        let (r, d) = (self.size(), self.d());
        let s2 = s * s;
        let mut c = DMatrix::<Complex64>::zeros(r, r);
        for (i, row) in self.rows.iter().enumerate() {
            for j in 0..d {
                c[(i, j)] = Complex64::new(row.get(j).copied().unwrap_or(0.0), 0.0);
            }
            if i < d {
                c[(i, i)] -= s2;
            }
            for (m, &k) in kappa.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut pow = Complex64::new(1.0, 0.0);
                for &q in row.iter().skip(d) {
                    acc += q * pow;
                    pow *= k;
                }
                if i >= d {
                    acc -= s2 * k.powu((i - d) as u32);
                }
                c[(i, d + m)] = acc;
            }
        }
        c
    }

    pub fn build(&self, s: Complex64) -> Result<BoundarySystem> {
        let kappa = self.cp.admissible_roots(s)?;
        let c = self.matrix_with_roots(s, &kappa);
        Ok(BoundarySystem { s, c, kappa, t_c: self.t_c.clone(), d: self.d(), p: self.p })
    }
}

/// `a_i = (Q X)_i/(p+2)! − i^p/p!` with `X_j = j^{p+2}`: the coefficient of
/// `h^{p+2} ∂^{p+2}U(0)` in the residual of row `i`.
fn truncation_coefficients(rows: &[Vec<f64>], p: usize) -> Vec<f64> {
    let fact = |n: usize| -> f64 { (1..=n).map(|k| k as f64).product() };
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let qx: f64 = row.iter().enumerate().map(|(j, q)| q * (j as f64).powi(p as i32 + 2)).sum();
            qx / fact(p + 2) - (i as f64).powi(p as i32) / fact(p)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BoundarySystem {
    pub s: Complex64,
    pub c: DMatrix<Complex64>,
    pub kappa: Vec<Complex64>,
    pub t_c: Vec<f64>,
    pub d: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundarySolution {
    pub h: f64,
    /// `|ζ̂_i|`, `i < d`.
    pub zeta: Vec<f64>,
    /// `|σ_j|`.
    pub sigma: Vec<f64>,
    /// `1/(1−|κ_j|²)`.
    pub decay: Vec<f64>,
    /// `‖ζ̂‖_{1D,x}`.
    pub norm: f64,
    /// `h^{p+2} ‖C⁻¹‖_max ‖T_C‖_max`.
    pub max_bound: f64,
}

impl BoundarySystem {
    pub fn size(&self) -> usize {
        self.c.nrows()
    }

    pub fn determinant(&self) -> Complex64 {
        self.c.clone().determinant()
    }

    /// Smallest and largest singular values of `C`.
    pub fn singular_extremes(&self) -> (f64, f64) {
        let sv = self.c.clone().svd(false, false).singular_values;
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sv.iter().copied().fold(0.0, f64::max);
        (min, max)
    }

    pub fn inverse(&self) -> Result<DMatrix<Complex64>> {
        let (min, max) = self.singular_extremes();
        if min <= 1e-14 * max {
            return Err(Error::SingularBoundarySystem { sigma_min: min });
        }
        self.c.clone().try_inverse().ok_or(Error::SingularBoundarySystem { sigma_min: min })
    }

    /// Solves for `Σ = h^{p+2} C⁻¹ T_C` and assembles `‖ζ̂‖_{1D,x}`.
    pub fn solve(&self, h: f64) -> Result<BoundarySolution> {
        let inv = self.inverse()?;
        let scale = h.powi(self.p as i32 + 2);
        let rhs = DVector::from_iterator(self.t_c.len(), self.t_c.iter().map(|&t| Complex64::new(scale * t, 0.0)));
        let sigma_all = &inv * rhs;
        let zeta: Vec<f64> = sigma_all.iter().take(self.d).map(|z| z.norm()).collect();
        let sigma: Vec<f64> = sigma_all.iter().skip(self.d).map(|z| z.norm()).collect();
        let decay: Vec<f64> = self.kappa.iter().map(|&k| decay_factor(k)).collect();
        let norm_sq = h * zeta.iter().map(|z| z * z).sum::<f64>()
            + h * sigma.iter().zip(&decay).map(|(s, g)| s * s * g).sum::<f64>();
        let inv_max = inv.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let t_max = self.t_c.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        Ok(BoundarySolution { h, zeta, sigma, decay, norm: norm_sq.sqrt(), max_bound: scale * inv_max * t_max })
    }
}
