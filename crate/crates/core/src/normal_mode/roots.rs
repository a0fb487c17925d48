//! Roots of the characteristic equation `Σ a_j κ^j = s̃² κ^l` of a centered
//! second-derivative stencil.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Admissibility is decided by modulus once `Re s̃` reaches this value.
pub const RE_CLEAR: f64 = 1e-2;
/// Margin around the unit circle for the modulus rule.
pub const UNIT_TOL: f64 = 1e-12;
const CONTINUATION_STEPS: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicProblem {
    coeffs: Vec<f64>,
}

impl CharacteristicProblem {
    /// `coeffs` holds `a_0..a_{2l}`; it must be symmetric and sum to zero.
    pub fn new(coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() < 3 || coeffs.len() % 2 == 0 {
            return Err(Error::Table(format!("stencil of length {} is not centered", coeffs.len())));
        }
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let n = coeffs.len();
        if (0..n).any(|j| (coeffs[j] - coeffs[n - 1 - j]).abs() > 1e-14 * scale) {
            return Err(Error::Table("stencil is not symmetric".into()));
        }
        if coeffs.iter().sum::<f64>().abs() > 1e-13 * scale {
            return Err(Error::Table("stencil does not annihilate constants".into()));
        }
        if coeffs[0] == 0.0 {
            return Err(Error::Table("outermost stencil coefficient vanishes".into()));
        }
        Ok(Self { coeffs: coeffs.to_vec() })
    }

    pub fn l(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients of `Σ a_j κ^j − s̃² κ^l`, lowest degree first.
    pub fn polynomial(&self, s: Complex64) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = self.coeffs.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        c[self.l()] -= s * s;
        c
    }

    /// All `2l` roots: companion-matrix eigenvalues polished by Newton steps.
    pub fn all_roots(&self, s: Complex64) -> Result<Vec<Complex64>> {
        let c = self.polynomial(s);
        let deg = c.len() - 1;
        let lead = c[deg];
        let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
        for j in 0..deg {
            comp[(0, j)] = -c[deg - 1 - j] / lead;
        }
        for i in 1..deg {
            comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
        }
        let eig = comp.schur().eigenvalues().ok_or(Error::RootCount { found: 0, expected: deg })?;
        let roots: Vec<Complex64> = eig.iter().map(|&z| polish(&c, z)).collect();
        if roots.len() != deg {
            return Err(Error::RootCount { found: roots.len(), expected: deg });
        }
        Ok(roots)
    }

    /// The `l` admissible roots, the limits from `Re s̃ > 0` of those inside
    /// the unit circle. Sorted by decreasing modulus when decided by modulus;
    /// when continuation is needed the order of the reference point is kept.
    pub fn admissible_roots(&self, s: Complex64) -> Result<Vec<Complex64>> {
        let l = self.l();
        let mut roots = self.all_roots(s)?;
        roots.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        if s.re >= RE_CLEAR {
            let inside: Vec<Complex64> = roots.iter().copied().filter(|k| k.norm() < 1.0 - UNIT_TOL).collect();
            if inside.len() != l {
                return Err(Error::RootCount { found: inside.len(), expected: l });
            }
            return Ok(inside.into_iter().rev().collect());
        }
        if roots[l - 1].norm() < 1.0 - UNIT_TOL && roots[l].norm() > 1.0 + UNIT_TOL {
            return Ok(roots[..l].iter().rev().copied().collect());
        }
        let start = Complex64::new(RE_CLEAR, s.im);
        let path = continuation_path(start, s);
        self.track(start, &path)
    }

    /// Follows the admissible roots at `start` along `path` by nearest
    /// matching and returns them at the last point.
    pub fn track(&self, start: Complex64, path: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut current = self.admissible_roots(start)?;
        for &z in path {
            let next = self.all_roots(z)?;
            current = match_nearest(&current, &next);
        }
        Ok(current)
    }
}

/// Points from `start` to `end` in `Re`, geometrically spaced, then `end`.
fn continuation_path(start: Complex64, end: Complex64) -> Vec<Complex64> {
    let floor = end.re.max(1e-10);
    let ratio = (floor / start.re).powf(1.0 / CONTINUATION_STEPS as f64);
    let mut re = start.re;
    let mut path = Vec::with_capacity(CONTINUATION_STEPS + 1);
    for _ in 0..CONTINUATION_STEPS {
        re *= ratio;
        path.push(Complex64::new(re, end.im));
    }
    path.push(end);
    path
}

/// Greedy nearest-neighbour assignment of each tracked root to a fresh root.
pub fn match_nearest(tracked: &[Complex64], fresh: &[Complex64]) -> Vec<Complex64> {
    let mut used = vec![false; fresh.len()];
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(tracked.len() * fresh.len());
    for (i, t) in tracked.iter().enumerate() {
        for (j, f) in fresh.iter().enumerate() {
            pairs.push(((t - f).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = vec![None; tracked.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !used[j] {
            out[i] = Some(fresh[j]);
            used[j] = true;
        }
    }
    out.into_iter().map(|z| z.expect("every tracked root is matched")).collect()
}

fn horner(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

fn polish(c: &[Complex64], mut z: Complex64) -> Complex64 {
    for _ in 0..4 {
        let (p, dp) = horner(c, z);
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        let next = z - step;
        // Only accept steps that reduce the residual; near double roots
        // Newton can wander.
        if horner(c, next).0.norm() < p.norm() {
            z = next;
        } else {
            break;
        }
    }
    z
}

/// `f(l, θ) = −Σ_{n<l} 2(n!)²/(2n+2)! (4 sin²(θ/2))^{n+1}`, the symbol of the
/// order-`2l` central second difference.
pub fn dispersion_f(l: usize, theta: f64) -> f64 {
    let x = 4.0 * (theta / 2.0).sin().powi(2);
    let mut fact_n = 1.0;
    let mut sum = 0.0;
    for n in 0..l {
        if n > 0 {
            fact_n *= n as f64;
        }
        let fact_2n2: f64 = (1..=(2 * n + 2)).map(|k| k as f64).product();
        sum += 2.0 * fact_n * fact_n / fact_2n2 * x.powi(n as i32 + 1);
    }
    -sum
}

/// `1/(1−|κ|²)`.
pub fn decay_factor(kappa: Complex64) -> f64 {
    1.0 / (1.0 - kappa.norm_sqr())
}
