//! SAT semi-discretizations of `u_tt = u_xx (+ u_yy) + F`.
//!
//! Dirichlet data enters as
//! `u_tt = Du − H⁻¹S₁ᵀ(u₁−g) − (ι/h)H⁻¹e₁(u₁−g)` at the left end and the mirror
//! image on the right. Neumann data is the outward normal derivative and enters
//! as `u_tt = Du + H⁻¹e₁(S₁u − ∂u/∂x)`, which cancels the boundary flux of `D`
//! and leaves `Q = −h²H⁻¹M`.
//!
//! Every operator is stored at unit spacing: `Q` is `h²` times the spatial
//! operator and the norm is `P = H/h`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::banded::BandedBorder;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, sym_part_extremes};
use crate::parallel::{self, Execution};
use crate::sbp::SbpD2Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

impl std::fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
        })
    }
}

impl std::str::FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            other => Err(Error::Config(format!("unknown boundary kind `{other}`"))),
        }
    }
}

/// Relative slack on the penalty check and on the energy eigenvalue test.
pub const IOTA_TOL: f64 = 1e-9;
pub const ENERGY_TOL: f64 = 1e-10;

/// One-dimensional SAT semi-discretization on a single grid.
#[derive(Debug, Clone)]
pub struct SemiDiscretization1D {
    kind: BoundaryKind,
    op: SbpD2Operator,
    q: BandedBorder,
    lift: Vec<f64>,
    iota: Option<f64>,
    iota0: Option<f64>,
}

impl SemiDiscretization1D {
    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn operator(&self) -> &SbpD2Operator {
        &self.op
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn h(&self) -> f64 {
        self.op.h()
    }

    pub fn iota(&self) -> Option<f64> {
        self.iota
    }

    pub fn iota0(&self) -> Option<f64> {
        self.iota0
    }

    /// Homogeneous operator `Q` (unit spacing), banded.
    pub fn q(&self) -> &BandedBorder {
        &self.q
    }

    pub fn q_dense(&self) -> DMatrix<f64> {
        self.q.to_dense()
    }

    /// Diagonal of `P = H/h`.
    pub fn p(&self) -> &[f64] {
        self.op.norm_unit()
    }

    pub fn pq_dense(&self) -> DMatrix<f64> {
        let mut pq = self.q_dense();
        for (i, w) in self.p().iter().enumerate() {
            pq.row_mut(i).iter_mut().for_each(|v| *v *= w);
        }
        pq
    }

    /// Data injector at the left end (leading entries, unit spacing). The
    /// right injector is its mirror image.
    pub fn lift(&self) -> &[f64] {
        &self.lift
    }

    /// Power of `h` dividing the lifted data: 2 for Dirichlet, 1 for Neumann.
    pub fn data_power(&self) -> i32 {
        match self.kind {
            BoundaryKind::Dirichlet => 2,
            BoundaryKind::Neumann => 1,
        }
    }

    fn data_scale(&self) -> f64 {
        self.h().powi(-self.data_power())
    }

    /// `out += Q u / h²`.
    pub fn apply_homogeneous(&self, u: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; u.len()];
        self.q.apply(u, &mut tmp, 1.0 / (self.h() * self.h()));
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }

    /// `out += lift_L g_left + lift_R g_right`, scaled for the grid.
    pub fn add_data(&self, out: &mut [f64], g_left: f64, g_right: f64) {
        let n = out.len();
        let s = self.data_scale();
        for (k, c) in self.lift.iter().enumerate() {
            out[k] += s * c * g_left;
            out[n - 1 - k] += s * c * g_right;
        }
    }

    /// Full right-hand side `Qu/h² + data + F`.
    pub fn rhs(&self, u: &[f64], g_left: f64, g_right: f64, forcing: Option<&[f64]>) -> Result<Vec<f64>> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), actual: u.len() });
        }
        let mut out = forcing.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; u.len()]);
        if out.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), actual: out.len() });
        }
        self.apply_homogeneous(u, &mut out);
        self.add_data(&mut out, g_left, g_right);
        Ok(out)
    }
}

/// Dense `Q(ι)` for the Dirichlet treatment at unit spacing, plus the left lift.
fn dirichlet_parts(op: &SbpD2Operator, iota: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = op.n();
    let p = op.norm_unit();
    let s = op.s_first_unit();
    let mut q = op.d_unit().to_dense();
    // −P⁻¹(S₁ᵀ + ι e₁) e₁ᵀ and its mirror at the right end.
    for (k, &sk) in s.iter().enumerate() {
        q[(k, 0)] -= sk / p[k];
        q[(n - 1 - k, n - 1)] -= sk / p[n - 1 - k];
    }
    q[(0, 0)] -= iota / p[0];
    q[(n - 1, n - 1)] -= iota / p[n - 1];
    let mut lift: Vec<f64> = s.iter().enumerate().map(|(k, &sk)| sk / p[k]).collect();
    lift[0] += iota / p[0];
    (q, lift)
}

fn neumann_parts(op: &SbpD2Operator) -> (DMatrix<f64>, Vec<f64>) {
    let n = op.n();
    let p = op.norm_unit();
    let mut q = -op.m_unit().to_dense();
    for i in 0..n {
        q.row_mut(i).iter_mut().for_each(|v| *v /= p[i]);
    }
    (q, vec![1.0 / p[0]])
}

fn compress(q: &DMatrix<f64>, op: &SbpD2Operator) -> Result<BandedBorder> {
    BandedBorder::from_dense(q, op.interior_coeffs(), 1e-13)
}

pub fn assemble_dirichlet_1d(op: &SbpD2Operator, iota: f64) -> Result<SemiDiscretization1D> {
    let iota0 = compute_iota0(op)?;
    if iota < iota0 * (1.0 - IOTA_TOL) - 1e-12 {
        return Err(Error::PenaltyBelowThreshold { iota, iota0 });
    }
    let (q, lift) = dirichlet_parts(op, iota);
    Ok(SemiDiscretization1D {
        kind: BoundaryKind::Dirichlet,
        op: op.clone(),
        q: compress(&q, op)?,
        lift,
        iota: Some(iota),
        iota0: Some(iota0),
    })
}

/// Dirichlet assembly at `factor · ι₀`.
pub fn assemble_dirichlet_scaled(op: &SbpD2Operator, factor: f64) -> Result<SemiDiscretization1D> {
    let iota0 = compute_iota0(op)?;
    assemble_dirichlet_1d(op, factor * iota0)
}

/// Dirichlet assembly that skips the stability threshold. Only meant for
/// negative controls and analysis of unstable penalties.
pub fn assemble_dirichlet_unchecked(op: &SbpD2Operator, iota: f64) -> Result<SemiDiscretization1D> {
    let (q, lift) = dirichlet_parts(op, iota);
    Ok(SemiDiscretization1D {
        kind: BoundaryKind::Dirichlet,
        op: op.clone(),
        q: compress(&q, op)?,
        lift,
        iota: Some(iota),
        iota0: None,
    })
}

pub fn assemble_neumann_1d(op: &SbpD2Operator) -> Result<SemiDiscretization1D> {
    let (q, lift) = neumann_parts(op);
    Ok(SemiDiscretization1D {
        kind: BoundaryKind::Neumann,
        op: op.clone(),
        q: compress(&q, op)?,
        lift,
        iota: None,
        iota0: None,
    })
}

/// Assembles either kind; `penalty_factor` multiplies `ι₀` for Dirichlet.
pub fn assemble_1d(op: &SbpD2Operator, kind: BoundaryKind, penalty_factor: f64) -> Result<SemiDiscretization1D> {
    match kind {
        BoundaryKind::Dirichlet => assemble_dirichlet_scaled(op, penalty_factor),
        BoundaryKind::Neumann => assemble_neumann_1d(op),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `‖PQ − (PQ)ᵀ‖_max`.
    pub asymmetry: f64,
    pub pq_max_abs: f64,
    pub pq_norm2: f64,
    pub eig_min: f64,
    /// Largest eigenvalue of `sym(PQ)`; must not be positive.
    pub eig_max: f64,
    pub passed: bool,
}

/// Checks that `PQ` is symmetric and negative semi-definite.
pub fn check_energy_condition(sd: &SemiDiscretization1D) -> EnergyReport {
    energy_report(&sd.pq_dense())
}

fn energy_report(pq: &DMatrix<f64>) -> EnergyReport {
    let asymmetry = (pq - pq.transpose()).amax();
    let pq_max_abs = pq.amax();
    let pq_norm2 = spectral_norm(pq);
    let (eig_min, eig_max) = sym_part_extremes(pq);
    let passed = asymmetry <= ENERGY_TOL * pq_max_abs && eig_max <= ENERGY_TOL * pq_norm2;
    EnergyReport { asymmetry, pq_max_abs, pq_norm2, eig_min, eig_max, passed }
}

fn pq_dirichlet(op: &SbpD2Operator, iota: f64) -> DMatrix<f64> {
    let (mut q, _) = dirichlet_parts(op, iota);
    for (i, w) in op.norm_unit().iter().enumerate() {
        q.row_mut(i).iter_mut().for_each(|v| *v *= w);
    }
    q
}

fn iota_passes(op: &SbpD2Operator, iota: f64) -> bool {
    let pq = pq_dirichlet(op, iota);
    let (_, eig_max) = sym_part_extremes(&pq);
    eig_max <= ENERGY_TOL * spectral_norm(&pq)
}

const IOTA_MAX: f64 = 1e6;

fn iota0_cache() -> &'static Mutex<HashMap<(usize, usize), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Smallest Dirichlet penalty for which `sym(PQ)` is negative semi-definite,
/// found by bisection (the eigenvalue is monotone in `ι`). The value depends
/// only on the order and grid size, so results are memoized.
pub fn compute_iota0(op: &SbpD2Operator) -> Result<f64> {
    let key = (op.order().interior(), op.n());
    if let Some(&v) = iota0_cache().lock().expect("cache poisoned").get(&key) {
        return Ok(v);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while !iota_passes(op, hi) {
        lo = hi;
        hi *= 2.0;
        if hi > IOTA_MAX {
            return Err(Error::BisectionBracket { lo: 0.0, hi: IOTA_MAX });
        }
    }
    if iota_passes(op, lo) {
        return Err(Error::BisectionBracket { lo, hi });
    }
    while hi - lo > 1e-10 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if iota_passes(op, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    iota0_cache().lock().expect("cache poisoned").insert(key, hi);
    Ok(hi)
}

/// Boundary data on the four sides of the unit square. West/east lines are
/// indexed by `y` (length `ny`), south/north by `x` (length `nx`). Dirichlet
/// sides carry values, Neumann sides outward normal derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData2D {
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl BoundaryData2D {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { west: vec![0.0; ny], east: vec![0.0; ny], south: vec![0.0; nx], north: vec![0.0; nx] }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for side in [&mut self.west, &mut self.east, &mut self.south, &mut self.north] {
            side.iter_mut().for_each(|v| *v *= factor);
        }
        self
    }
}

/// Two-dimensional semi-discretization on the unit square. Unknowns are
/// stored column by column: index `j·ny + i` holds the value at `(x_j, y_i)`.
#[derive(Debug, Clone)]
pub struct SemiDiscretization2D {
    x: SemiDiscretization1D,
    y: SemiDiscretization1D,
}

pub fn assemble_2d(x: SemiDiscretization1D, y: SemiDiscretization1D) -> Result<SemiDiscretization2D> {
    let (hx, hy) = (x.h(), y.h());
    if (hx - hy).abs() > 1e-12 * hx.max(hy) {
        return Err(Error::GridMismatch(format!("spacings differ: hx = {hx}, hy = {hy}")));
    }
    Ok(SemiDiscretization2D { x, y })
}

impl SemiDiscretization2D {
    pub fn x(&self) -> &SemiDiscretization1D {
        &self.x
    }

    pub fn y(&self) -> &SemiDiscretization1D {
        &self.y
    }

    pub fn nx(&self) -> usize {
        self.x.n()
    }

    pub fn ny(&self) -> usize {
        self.y.n()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h(&self) -> f64 {
        self.x.h()
    }

    /// `out = (Q_x⊗I)u/h² + (I⊗Q_y)u/h² + data + F`.
    pub fn rhs_into(
        &self,
        u: &[f64],
        data: &BoundaryData2D,
        forcing: Option<&[f64]>,
        out: &mut [f64],
        exec: Execution,
    ) -> Result<()> {
        let (nx, ny) = (self.nx(), self.ny());
        let len = nx * ny;
        for actual in [u.len(), out.len(), forcing.map_or(len, <[f64]>::len)] {
            if actual != len {
                return Err(Error::DimensionMismatch { expected: len, actual });
            }
        }
        if data.west.len() != ny || data.east.len() != ny || data.south.len() != nx || data.north.len() != nx {
            return Err(Error::DimensionMismatch { expected: nx.max(ny), actual: data.west.len() });
        }
        let inv_h2 = 1.0 / (self.h() * self.h());
        let (qx, qy) = (self.x.q(), self.y.q());
        let (lx, ly) = (self.x.lift(), self.y.lift());
        let (sx, sy) = (self.x.data_scale(), self.y.data_scale());
        parallel::for_each_chunk(exec, out, ny, |j, col| {
            match forcing {
                Some(f) => col.copy_from_slice(&f[j * ny..(j + 1) * ny]),
                None => col.fill(0.0),
            }
            // Same centered evaluation as `BandedBorder::apply`, column-wise.
            let (start, coeffs) = qx.row(j);
            let center = &u[j * ny..(j + 1) * ny];
            for (k, c) in coeffs.iter().enumerate() {
                if start + k == j {
                    continue;
                }
                let src = &u[(start + k) * ny..(start + k + 1) * ny];
                let w = c * inv_h2;
                col.iter_mut().zip(src.iter().zip(center)).for_each(|(o, (v, c0))| *o += w * (v - c0));
            }
            let w = qx.row_sum(j) * inv_h2;
            if w != 0.0 {
                col.iter_mut().zip(center).for_each(|(o, c0)| *o += w * c0);
            }
            let mut tmp = vec![0.0; ny];
            qy.apply(&u[j * ny..(j + 1) * ny], &mut tmp, inv_h2);
            col.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            if j < lx.len() {
                let w = sx * lx[j];
                col.iter_mut().zip(&data.west).for_each(|(o, g)| *o += w * g);
            }
            if nx - 1 - j < lx.len() {
                let w = sx * lx[nx - 1 - j];
                col.iter_mut().zip(&data.east).for_each(|(o, g)| *o += w * g);
            }
            for (k, c) in ly.iter().enumerate() {
                col[k] += sy * c * data.south[j];
                col[ny - 1 - k] += sy * c * data.north[j];
            }
        });
        Ok(())
    }

    pub fn rhs(&self, u: &[f64], data: &BoundaryData2D, forcing: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.rhs_into(u, data, forcing, &mut out, Execution::Sequential)?;
        Ok(out)
    }

    /// Explicit `(Q_x⊗I + I⊗Q_y)/h²`. Intended for small grids and tests.
    pub fn dense_operator(&self) -> DMatrix<f64> {
        let (qx, qy) = (self.x.q_dense(), self.y.q_dense());
        let ix = DMatrix::<f64>::identity(self.nx(), self.nx());
        let iy = DMatrix::<f64>::identity(self.ny(), self.ny());
        (qx.kronecker(&iy) + ix.kronecker(&qy)) / (self.h() * self.h())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbp::build_sbp_d2;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op(order: usize, n: usize) -> SbpD2Operator {
        build_sbp_d2(order, n, 1.0 / (n - 1) as f64).unwrap()
    }

    #[test]
    fn iota0_positive_and_bracketing() {
        for order in [2, 4, 6] {
            let o = op(order, 41);
            let iota0 = compute_iota0(&o).unwrap();
            assert!(iota0 > 0.0, "order {order}");
            assert!(check_energy_condition(&assemble_dirichlet_1d(&o, 2.0 * iota0).unwrap()).passed);
            assert!(check_energy_condition(&assemble_dirichlet_1d(&o, 1.2 * iota0).unwrap()).passed);
            assert!(!check_energy_condition(&assemble_dirichlet_unchecked(&o, 0.5 * iota0).unwrap()).passed);
            assert!(!iota_passes(&o, iota0 - 1e-6));
        }
    }

    #[test]
    fn penalty_below_threshold_rejected() {
        let o = op(4, 41);
        let iota0 = compute_iota0(&o).unwrap();
        assert!(matches!(assemble_dirichlet_1d(&o, 0.9 * iota0), Err(Error::PenaltyBelowThreshold { .. })));
    }

    #[test]
    fn neumann_satisfies_energy_condition() {
        for order in [2, 4, 6] {
            let sd = assemble_neumann_1d(&op(order, 41)).unwrap();
            let report = check_energy_condition(&sd);
            assert!(report.passed, "order {order}: {report:?}");
        }
    }

    #[test]
    fn second_order_neumann_first_row() {
        let sd = assemble_neumann_1d(&op(2, 11)).unwrap();
        let pq = sd.pq_dense();
        assert_eq!((pq[(0, 0)], pq[(0, 1)], pq[(0, 2)]), (-1.0, 1.0, 0.0));
        let q = sd.q_dense();
        assert_eq!((q[(0, 0)], q[(0, 1)]), (-2.0, 2.0));
    }

    #[test]
    fn second_order_dirichlet_first_rows() {
        let o = op(2, 11);
        let sd = assemble_dirichlet_unchecked(&o, 1.0).unwrap();
        let q = sd.q_dense();
        // Row 0: (1 + 3 − 2ι, −2, 1); row 1 picks up −P⁻¹ S₁ᵀ: (−1, −2, 1).
        assert_eq!((q[(0, 0)], q[(0, 1)], q[(0, 2)]), (2.0, -2.0, 1.0));
        assert_eq!((q[(1, 0)], q[(1, 1)], q[(1, 2)]), (-1.0, -2.0, 1.0));
        assert_eq!((q[(2, 0)], q[(2, 1)], q[(2, 2)], q[(2, 3)]), (0.5, 1.0, -2.0, 1.0));
    }

    #[test]
    fn zero_state_zero_data() {
        let sd = assemble_dirichlet_scaled(&op(4, 21), 1.2).unwrap();
        assert!(sd.rhs(&[0.0; 21], 0.0, 0.0, None).unwrap().iter().all(|&v| v == 0.0));
        let sd = assemble_neumann_1d(&op(6, 21)).unwrap();
        let rhs = sd.rhs(&[3.5; 21], 0.0, 0.0, None).unwrap();
        assert!(rhs.iter().all(|v| v.abs() < 1e-9), "{rhs:?}");
    }

    fn steady_residual(kind: BoundaryKind, order: usize, n: usize) -> f64 {
        let o = op(order, n);
        let sd = assemble_1d(&o, kind, 1.2).unwrap();
        let xs = o.grid().points();
        let u: Vec<f64> = xs.iter().map(|x| x * x - 0.3 * x + 0.7).collect();
        let (gl, gr) = match kind {
            BoundaryKind::Dirichlet => (u[0], u[n - 1]),
            BoundaryKind::Neumann => (0.3, 2.0 - 0.3),
        };
        let rhs = sd.rhs(&u, gl, gr, None).unwrap();
        rhs.iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn steady_quadratic_is_exact() {
        for order in [4, 6] {
            for kind in [BoundaryKind::Dirichlet, BoundaryKind::Neumann] {
                let r = steady_residual(kind, order, 31);
                assert!(r < 1e-8, "{kind} order {order}: {r}");
            }
        }
        assert!(steady_residual(BoundaryKind::Dirichlet, 2, 31) < 1e-8);
    }

    #[test]
    fn neumann_sign_convention_on_smooth_data() {
        // u = cos(x + 0.4): the residual against u'' stays at the closure's
        // accuracy only if the outward-derivative sign is right.
        let residual = |sign: f64| {
            let n = 81;
            let o = op(4, n);
            let sd = assemble_neumann_1d(&o).unwrap();
            let xs = o.grid().points();
            let u: Vec<f64> = xs.iter().map(|x| (x + 0.4).cos()).collect();
            let gl = sign * (0.4f64).sin();
            let gr = -sign * (1.4f64).sin();
            let rhs = sd.rhs(&u, gl, gr, None).unwrap();
            rhs.iter().zip(&u).map(|(r, v)| (r + v).abs()).fold(0.0, f64::max)
        };
        assert!(residual(1.0) < 1e-3);
        assert!(residual(-1.0) > 1.0);
    }

    fn random_field(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn matrix_free_matches_kronecker() {
        for (order, kx, ky) in [(2, BoundaryKind::Dirichlet, BoundaryKind::Neumann), (4, BoundaryKind::Neumann, BoundaryKind::Dirichlet)] {
            let n = 17;
            let sd = assemble_2d(assemble_1d(&op(order, n), kx, 1.2).unwrap(), assemble_1d(&op(order, n), ky, 1.2).unwrap())
                .unwrap();
            let u = random_field(n * n, 11);
            let dense = sd.dense_operator() * nalgebra::DVector::from_column_slice(&u);
            let mf = sd.rhs(&u, &BoundaryData2D::zeros(n, n), None).unwrap();
            let scale = dense.amax();
            let diff = mf.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-12 * scale.max(1.0), "diff {diff}");
        }
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let n = 21;
        let sd = assemble_2d(assemble_1d(&op(6, n), BoundaryKind::Dirichlet, 1.2).unwrap(), assemble_1d(&op(6, n), BoundaryKind::Dirichlet, 1.2).unwrap())
            .unwrap();
        let u = random_field(n * n, 3);
        let data = BoundaryData2D { west: random_field(n, 4), east: random_field(n, 5), south: random_field(n, 6), north: random_field(n, 7) };
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n * n];
        sd.rhs_into(&u, &data, None, &mut a, Execution::Sequential).unwrap();
        sd.rhs_into(&u, &data, None, &mut b, Execution::Parallel).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn boundary_data_lifting_matches_1d() {
        // A field constant in y with west/east data only reduces to the 1D scheme.
        let n = 15;
        let o = op(4, n);
        let x1 = assemble_1d(&o, BoundaryKind::Dirichlet, 1.2).unwrap();
        let y1 = assemble_1d(&o, BoundaryKind::Neumann, 1.2).unwrap();
        let sd = assemble_2d(x1.clone(), y1).unwrap();
        let line: Vec<f64> = o.grid().points().iter().map(|x| (3.0 * x).sin()).collect();
        let u: Vec<f64> = (0..n * n).map(|k| line[k / n]).collect();
        let mut data = BoundaryData2D::zeros(n, n);
        data.west.fill(0.25);
        data.east.fill(-0.5);
        let rhs2 = sd.rhs(&u, &data, None).unwrap();
        let rhs1 = x1.rhs(&line, 0.25, -0.5, None).unwrap();
        for j in 0..n {
            for i in 0..n {
                assert!((rhs2[j * n + i] - rhs1[j]).abs() < 1e-9 * rhs1[j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_mismatched_spacing() {
        let a = assemble_neumann_1d(&build_sbp_d2(2, 11, 0.1).unwrap()).unwrap();
        let b = assemble_neumann_1d(&build_sbp_d2(2, 11, 0.2).unwrap()).unwrap();
        assert!(matches!(assemble_2d(a, b), Err(Error::GridMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn kronecker_identity_on_separable_fields(seed in 0u64..1000, order in prop::sample::select(vec![2usize, 4, 6])) {
            let n = 15;
            let o = op(order, n);
            let x1 = assemble_1d(&o, BoundaryKind::Neumann, 1.2).unwrap();
            let y1 = assemble_1d(&o, BoundaryKind::Dirichlet, 1.2).unwrap();
            let sd = assemble_2d(x1.clone(), y1.clone()).unwrap();
            let v = random_field(n, seed);
            let w = random_field(n, seed + 7);
            let u: Vec<f64> = (0..n * n).map(|k| v[k / n] * w[k % n]).collect();
            let rhs = sd.rhs(&u, &BoundaryData2D::zeros(n, n), None).unwrap();
            let qv = x1.rhs(&v, 0.0, 0.0, None).unwrap();
            let qw = y1.rhs(&w, 0.0, 0.0, None).unwrap();
            for k in 0..n * n {
                let expected = qv[k / n] * w[k % n] + v[k / n] * qw[k % n];
                prop_assert!((rhs[k] - expected).abs() <= 1e-10 * expected.abs().max(1e3));
            }
        }

        #[test]
        fn penalties_above_threshold_are_stable(factor in 1.0f64..5.0, order in prop::sample::select(vec![2usize, 4, 6])) {
            let o = op(order, 25);
            let sd = assemble_dirichlet_scaled(&o, factor).unwrap();
            prop_assert!(check_energy_condition(&sd).passed);
        }
    }
}
