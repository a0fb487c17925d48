//! Eigen-decomposition of the transverse operator and the shifted scalar
//! problems it produces.
//!
//! With `PQ` symmetric negative semi-definite, `A = −P^{1/2} Q P^{−1/2}` is
//! symmetric positive semi-definite. Its orthonormal eigenvectors `Φ̂` give
//! `−Q/h² = Φ Λ Φ⁻¹` with `Φ = P^{−1/2} Φ̂` and `Φ⁻¹ = Φ̂ᵀ P^{1/2}`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, sym_eig_sorted, sym_part_extremes};
use crate::sat::{BoundaryKind, SemiDiscretization1D, ENERGY_TOL};

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues of `−Q/h²`, ascending.
    pub lambda: Vec<f64>,
    pub phi: DMatrix<f64>,
    pub phi_inv: DMatrix<f64>,
    pub norm_phi: f64,
    pub norm_phi_inv: f64,
    /// `‖Φ‖₂‖Φ⁻¹‖₂`.
    pub cond: f64,
    /// `‖Q/h² + ΦΛΦ⁻¹‖₂`.
    pub residual: f64,
    /// `‖Q/h²‖₂`.
    pub operator_norm: f64,
    pub h: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `√λ` with eigenvalues at round-off level treated as zero.
    pub fn sqrt_lambda(&self) -> Vec<f64> {
        let top = self.lambda.last().copied().unwrap_or(0.0).abs();
        self.lambda.iter().map(|&l| if l <= 1e-12 * top { 0.0 } else { l.sqrt() }).collect()
    }
}

/// Diagonalizes `Q/h²` given at unit spacing (`q`) with diagonal norm `p`.
pub fn diagonalize(q: &DMatrix<f64>, p: &[f64], h: f64) -> Result<Spectrum> {
    let n = q.nrows();
    if q.ncols() != n || p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: p.len() });
    }
    let mut pq = q.clone();
    for (i, w) in p.iter().enumerate() {
        pq.row_mut(i).iter_mut().for_each(|v| *v *= w);
    }
    let pq_norm = spectral_norm(&pq);
    let asym = (&pq - pq.transpose()).amax();
    let (_, eig_max) = sym_part_extremes(&pq);
    if eig_max > ENERGY_TOL * pq_norm || asym > ENERGY_TOL * pq.amax() {
        return Err(Error::NotNegativeSemidefinite { eig_max });
    }

    let sqrt_p: Vec<f64> = p.iter().map(|w| w.sqrt()).collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = -pq[(i, j)] / (sqrt_p[i] * sqrt_p[j]);
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let (values, mut vectors) = sym_eig_sorted(&a);
    for r in 0..n {
        let mut col = vectors.column_mut(r);
        let top = col.amax();
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-10 * top) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }

    let scale = 1.0 / (h * h);
    let lambda: Vec<f64> = values.iter().map(|v| v * scale).collect();
    let mut phi = vectors.clone();
    for i in 0..n {
        phi.row_mut(i).iter_mut().for_each(|v| *v /= sqrt_p[i]);
    }
    let mut phi_inv = vectors.transpose();
    for j in 0..n {
        phi_inv.column_mut(j).iter_mut().for_each(|v| *v *= sqrt_p[j]);
    }

    let q_scaled = q * scale;
    let mut recon = phi.clone();
    for (r, l) in lambda.iter().enumerate() {
        recon.column_mut(r).iter_mut().for_each(|v| *v *= l);
    }
    let residual = spectral_norm(&(&q_scaled + recon * &phi_inv));
    let norm_phi = spectral_norm(&phi);
    let norm_phi_inv = spectral_norm(&phi_inv);
    Ok(Spectrum {
        lambda,
        phi,
        phi_inv,
        norm_phi,
        norm_phi_inv,
        cond: norm_phi * norm_phi_inv,
        residual,
        operator_norm: spectral_norm(&q_scaled),
        h,
    })
}

pub fn diagonalize_semidisc(sd: &SemiDiscretization1D) -> Result<Spectrum> {
    diagonalize(&sd.q_dense(), sd.p(), sd.h())
}

/// The classical second-order Neumann Laplacian (unit spacing): tridiagonal
/// `(1, −2, 1)` with `−1` in both corners, self-adjoint in the plain `ℓ²`
/// inner product.
pub fn standard_neumann_matrix(n: usize) -> DMatrix<f64> {
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

/// Closed-form eigenvalues of [`standard_neumann_matrix`]`/h²`.
pub fn standard_neumann_eigenvalue(n: usize, h: f64, r: usize) -> f64 {
    let s = (PI * (r - 1) as f64 / (2 * n) as f64).sin();
    4.0 / (h * h) * s * s
}

/// Eigenvalues of `−d²/dx²` on the unit interval, `r ≥ 1`.
pub fn continuous_eigen_reference(kind: BoundaryKind, r: usize) -> f64 {
    let k = match kind {
        BoundaryKind::Neumann => r.saturating_sub(1),
        BoundaryKind::Dirichlet => r,
    } as f64;
    k * k * PI * PI
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftedDual {
    pub s: Complex64,
    /// `h²λ`.
    pub shift: f64,
    pub s_plus: Complex64,
}

/// `s̃₊ = √(s̃² + h²λ)` on the branch with non-negative real part.
pub fn shift(s: Complex64, lambda: f64, h: f64) -> ShiftedDual {
    let gamma = h * h * lambda;
    if gamma == 0.0 {
        let s_plus = if s.re < 0.0 { -s } else { s };
        return ShiftedDual { s, shift: gamma, s_plus };
    }
    let mut s_plus = (s * s + gamma).sqrt();
    if s_plus.re < 0.0 {
        s_plus = -s_plus;
    }
    ShiftedDual { s, shift: gamma, s_plus }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauReport {
    pub components: Vec<f64>,
    pub max_abs: f64,
    /// `max_r |τ̂₀^{(r)}| / h^{1/2}`.
    pub scaled: f64,
}

/// `τ̂₀ = Φ⁻¹T₀`.
pub fn spectral_transform(t0: &[f64], phi_inv: &DMatrix<f64>, h: f64) -> Result<TauReport> {
    if t0.len() != phi_inv.ncols() {
        return Err(Error::DimensionMismatch { expected: phi_inv.ncols(), actual: t0.len() });
    }
    let v = phi_inv * nalgebra::DVector::from_column_slice(t0);
    let components: Vec<f64> = v.iter().copied().collect();
    let max_abs = components.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    Ok(TauReport { components, max_abs, scaled: max_abs / h.sqrt() })
}

/// `‖w‖²_2D = h² Σ |w_ij|²` for a field stored column by column.
pub fn norm2d_sq(w: &[f64], h: f64) -> f64 {
    h * h * w.iter().map(|v| v * v).sum::<f64>()
}

/// `‖v‖²_1D = h Σ |v_j|²`.
pub fn norm1d_sq(v: &[f64], h: f64) -> f64 {
    h * v.iter().map(|x| x * x).sum::<f64>()
}

/// Applies `I_x ⊗ Φ⁻¹` to a field with `nx` columns of length `ny`, and
/// returns the mode lines `ε̂^{(r)}` (each of length `nx`).
pub fn decompose_field(field: &[f64], nx: usize, spectrum: &Spectrum) -> Result<Vec<Vec<f64>>> {
    let ny = spectrum.len();
    if field.len() != nx * ny {
        return Err(Error::DimensionMismatch { expected: nx * ny, actual: field.len() });
    }
    let mut modes = vec![vec![0.0; nx]; ny];
    for j in 0..nx {
        let col = nalgebra::DVector::from_column_slice(&field[j * ny..(j + 1) * ny]);
        let hat = &spectrum.phi_inv * col;
        for r in 0..ny {
            modes[r][j] = hat[r];
        }
    }
    Ok(modes)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub r: usize,
    pub lambda: f64,
    pub lambda_continuous: f64,
    pub relerr: f64,
}

pub fn spectrum_rows(spectrum: &Spectrum, kind: BoundaryKind) -> Vec<SpectrumRow> {
    spectrum
        .lambda
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let r = k + 1;
            let lambda_continuous = continuous_eigen_reference(kind, r);
            let relerr = if lambda_continuous == 0.0 {
                lambda.abs()
            } else {
                (lambda - lambda_continuous).abs() / lambda_continuous
            };
            SpectrumRow { r, lambda, lambda_continuous, relerr }
        })
        .collect()
}

pub fn write_spectrum_csv<W: Write>(mut out: W, rows: &[SpectrumRow]) -> std::io::Result<()> {
    writeln!(out, "r,lambda,lambda_continuous,relerr")?;
    for row in rows {
        writeln!(out, "{},{:.16e},{:.16e},{:.16e}", row.r, row.lambda, row.lambda_continuous, row.relerr)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::{assemble_1d, assemble_dirichlet_unchecked};
    use crate::sbp::build_sbp_d2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn neumann(order: usize, n: usize) -> SemiDiscretization1D {
        assemble_1d(&build_sbp_d2(order, n, 1.0 / (n - 1) as f64).unwrap(), BoundaryKind::Neumann, 1.2).unwrap()
    }

    #[test]
    fn standard_neumann_closed_form() {
        let n = 41;
        let h = 1.0 / (n - 1) as f64;
        let s = diagonalize(&standard_neumann_matrix(n), &vec![1.0; n], h).unwrap();
        for r in 1..=n {
            let exact = standard_neumann_eigenvalue(n, h, r);
            let err = (s.lambda[r - 1] - exact).abs();
            assert!(err <= 1e-10 * exact.max(1e-300) || err < 1e-9, "r {r}: {} vs {exact}", s.lambda[r - 1]);
        }
        assert!(s.lambda[0].abs() < 1e-9);
    }

    #[test]
    fn standard_neumann_cosine_transform() {
        let n = 20;
        let h = 1.0 / (n - 1) as f64;
        let s = diagonalize(&standard_neumann_matrix(n), &vec![1.0; n], h).unwrap();
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        let tau = spectral_transform(&e1, &s.phi_inv, h).unwrap();
        for r in 1..=n {
            let expected = if r == 1 {
                1.0 / (n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt() * (PI * (r - 1) as f64 / (2 * n) as f64).cos()
            };
            assert!((tau.components[r - 1] - expected).abs() < 1e-12, "r {r}");
        }
    }

    #[test]
    fn sbp_second_order_neumann_spectrum() {
        // The SBP norm shifts the closed form to N−1 cells.
        let n = 41;
        let sd = neumann(2, n);
        let s = diagonalize_semidisc(&sd).unwrap();
        for r in 1..=n {
            let t = (PI * (r - 1) as f64 / (2 * (n - 1)) as f64).sin();
            let exact = 4.0 / (sd.h() * sd.h()) * t * t;
            assert!((s.lambda[r - 1] - exact).abs() <= 1e-10 * exact.max(1.0), "r {r}");
        }
    }

    #[test]
    fn spectrum_invariants() {
        for order in [2, 4, 6] {
            for sd in [neumann(order, 31), assemble_1d(&build_sbp_d2(order, 31, 1.0 / 30.0).unwrap(), BoundaryKind::Dirichlet, 1.2).unwrap()] {
                let s = diagonalize_semidisc(&sd).unwrap();
                let top = *s.lambda.last().unwrap();
                assert!(s.lambda.iter().all(|&l| l >= -1e-10 * top));
                assert!(s.lambda.windows(2).all(|w| w[0] <= w[1]));
                assert!(s.residual <= 1e-8 * s.operator_norm, "residual {}", s.residual);
                let p = sd.p();
                let inv_sqrt = p.iter().map(|w| 1.0 / w.sqrt()).fold(0.0, f64::max);
                let sqrt = p.iter().map(|w| w.sqrt()).fold(0.0, f64::max);
                assert!((s.norm_phi - inv_sqrt).abs() <= 1e-8 * inv_sqrt);
                assert!((s.norm_phi_inv - sqrt).abs() <= 1e-8 * sqrt);
            }
        }
    }

    #[test]
    fn refuses_unstable_operator() {
        let op = build_sbp_d2(4, 31, 1.0 / 30.0).unwrap();
        let sd = assemble_dirichlet_unchecked(&op, 0.5).unwrap();
        assert!(matches!(diagonalize_semidisc(&sd), Err(Error::NotNegativeSemidefinite { .. })));
    }

    #[test]
    fn neumann_null_vector_and_phase() {
        let s = diagonalize_semidisc(&neumann(4, 25)).unwrap();
        assert!(s.lambda[0].abs() < 1e-8);
        let col = s.phi.column(0);
        assert!(col.iter().all(|&v| v > 0.0));
        let first = col[0];
        assert!(col.iter().all(|&v| (v - first).abs() < 1e-8));
    }

    #[test]
    fn continuous_reference_values() {
        assert_eq!(continuous_eigen_reference(BoundaryKind::Neumann, 1), 0.0);
        assert!((continuous_eigen_reference(BoundaryKind::Neumann, 3) - 4.0 * PI * PI).abs() < 1e-12);
        assert!((continuous_eigen_reference(BoundaryKind::Neumann, 2) - PI * PI).abs() < 1e-12);
        assert!((continuous_eigen_reference(BoundaryKind::Dirichlet, 1) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn shift_examples() {
        let d = shift(Complex64::new(1.0, 0.0), 4.0, 1.0);
        assert!((d.s_plus.re - 5f64.sqrt()).abs() < 1e-15);
        let s = Complex64::new(0.3, -2.0);
        assert_eq!(shift(s, 0.0, 0.1).s_plus, s);
    }

    #[test]
    fn shift_never_reduces_real_part_on_many_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut violations = 0;
        for _ in 0..100_000 {
            let delta: f64 = rng.gen_range(0.0..2.0);
            let s = Complex64::new(delta + rng.gen_range(0.0..3.0), rng.gen_range(-10.0..10.0));
            let gamma: f64 = rng.gen_range(0.0..20.0);
            if shift(s, gamma, 1.0).s_plus.re < delta {
                violations += 1;
            }
        }
        assert_eq!(violations, 0);
    }

    proptest! {
        #[test]
        fn shift_keeps_real_part(re in 0.0f64..5.0, im in -50.0f64..50.0, gamma in 0.0f64..100.0) {
            let d = shift(Complex64::new(re, im), gamma, 1.0);
            prop_assert!(d.s_plus.re >= re - 1e-12 * (1.0 + d.s_plus.norm()));
            let err = (d.s_plus * d.s_plus - (d.s * d.s + gamma)).norm();
            prop_assert!(err <= 1e-9 * (1.0 + gamma + d.s.norm_sqr()));
        }
    }

    #[test]
    fn mode_energies_sum_to_field_norm() {
        let ny = 21;
        let nx = 13;
        let s = diagonalize_semidisc(&neumann(4, ny)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let field: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let modes = decompose_field(&field, nx, &s).unwrap();
        let h = s.h;
        let flat: Vec<f64> = (0..nx).flat_map(|j| modes.iter().map(move |m| m[j])).collect();
        let lhs = norm2d_sq(&flat, h);
        let rhs = h * modes.iter().map(|m| norm1d_sq(m, h)).sum::<f64>();
        assert!((lhs - rhs).abs() <= 1e-13 * lhs);
    }

    #[test]
    fn corner_data_spreads_over_modes() {
        let tau = |n: usize| {
            let s = diagonalize_semidisc(&neumann(2, n)).unwrap();
            let mut e1 = vec![0.0; n];
            e1[0] = 1.0;
            spectral_transform(&e1, &s.phi_inv, s.h).unwrap().max_abs
        };
        let (a, b, c) = (tau(41), tau(81), tau(161));
        for ratio in [a / b, b / c] {
            assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let s = diagonalize_semidisc(&neumann(2, 11)).unwrap();
        let rows = spectrum_rows(&s, BoundaryKind::Neumann);
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("r,lambda,lambda_continuous,relerr"));
        assert_eq!(text.lines().count(), 12);
    }
}
