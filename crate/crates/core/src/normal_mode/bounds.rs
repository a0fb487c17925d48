//! Mode-by-mode bounds for the two-dimensional corner problem.
//!
//! Diagonalizing the `y` operator reduces the `x` boundary problem to a
//! family of one-dimensional problems at shifted duals `s̃₊ = √(s̃² + h²λ_r)`.
//! Modes with small `h√λ_r` sit close to the origin where the decay of the
//! dominant admissible root degrades; summing their contributions explains
//! the logarithmic factor at a corner.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::boundary::ClosureModel;
use super::roots::decay_factor;
use crate::error::{Error, Result};
use crate::sat::{assemble_1d, BoundaryKind};
use crate::sbp::build_sbp_d2;
use crate::spectral::{diagonalize_semidisc, shift};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeBound {
    pub r: usize,
    pub lambda: f64,
    pub s_plus_re: f64,
    pub s_plus_im: f64,
    /// `1/(1 − |κ₁|²)` for the dominant admissible root.
    pub decay: f64,
    /// `max |C⁻¹(s̃₊)|`.
    pub inverse_norm: f64,
}

/// Decay and inverse norms for every shifted dual `s̃₊(ηh, λ_r)`.
pub fn kappa_bound_sweep(model: &ClosureModel, eta: f64, h: f64, lambda: &[f64]) -> Result<Vec<ModeBound>> {
    let s = Complex64::new(eta * h, 0.0);
    lambda
        .iter()
        .enumerate()
        .map(|(r, &lam)| {
            let sp = shift(s, lam.max(0.0), h).s_plus;
            let bs = model.build(sp)?;
            let inverse_norm = bs.inverse()?.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let k1 = bs.kappa.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
            Ok(ModeBound { r, lambda: lam, s_plus_re: sp.re, s_plus_im: sp.im, decay: decay_factor(k1), inverse_norm })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerLevel {
    pub n: usize,
    pub h: f64,
    /// Number of modes with `h√λ_r ≤ δ`.
    pub small_modes: usize,
    /// `Σ_{r ≤ r_δ} h/(1 − |κ₁|²)`.
    pub small_sum: f64,
    pub max_decay_large: f64,
    pub max_inverse_norm_large: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerLogFit {
    pub order: usize,
    pub x: BoundaryKind,
    pub y: BoundaryKind,
    pub eta: f64,
    pub delta: f64,
    pub levels: Vec<CornerLevel>,
    /// `small_sum ≈ K log(1/h) + c`.
    pub k: f64,
    pub c: f64,
    /// Largest absolute deviation from the fit relative to the largest sum.
    pub residual: f64,
}

/// Least-squares line `y = k x + c`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let k = sxy / sxx;
    (k, my - k * mx)
}

pub struct CornerSetup {
    pub order: usize,
    pub x: BoundaryKind,
    pub y: BoundaryKind,
    pub penalty_factor: f64,
    pub eta: f64,
    pub delta: f64,
}

pub fn corner_log_bound(setup: &CornerSetup, ns: &[usize]) -> Result<CornerLogFit> {
    if ns.len() < 2 {
        return Err(Error::Config("corner fit needs at least two grids".into()));
    }
    let mut levels = Vec::with_capacity(ns.len());
    for &n in ns {
        let h = 1.0 / (n - 1) as f64;
        let op = build_sbp_d2(setup.order, n, h)?;
        let sx = assemble_1d(&op, setup.x, setup.penalty_factor)?;
        let sy = assemble_1d(&op, setup.y, setup.penalty_factor)?;
        let model = ClosureModel::from_semidisc(&sx)?;
        let spectrum = diagonalize_semidisc(&sy)?;
        let modes = kappa_bound_sweep(&model, setup.eta, h, &spectrum.lambda)?;
        let sqrt = spectrum.sqrt_lambda();
        let (small, large): (Vec<_>, Vec<_>) = modes.iter().zip(&sqrt).partition(|(_, &sl)| h * sl <= setup.delta);
        levels.push(CornerLevel {
            n,
            h,
            small_modes: small.len(),
            small_sum: small.iter().map(|(m, _)| h * m.decay).sum(),
            max_decay_large: large.iter().map(|(m, _)| m.decay).fold(0.0, f64::max),
            max_inverse_norm_large: large.iter().map(|(m, _)| m.inverse_norm).fold(0.0, f64::max),
        });
    }
    let x: Vec<f64> = levels.iter().map(|l| (1.0 / l.h).ln()).collect();
    let y: Vec<f64> = levels.iter().map(|l| l.small_sum).collect();
    let (k, c) = linear_fit(&x, &y);
    let top = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let residual = x.iter().zip(&y).map(|(a, b)| (k * a + c - b).abs()).fold(0.0, f64::max) / top;
    Ok(CornerLogFit {
        order: setup.order,
        x: setup.x,
        y: setup.y,
        eta: setup.eta,
        delta: setup.delta,
        levels,
        k,
        c,
        residual,
    })
}
