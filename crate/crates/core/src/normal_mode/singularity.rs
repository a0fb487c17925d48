//! Classification of the singularities of `C(s̃)`: the origin exponent `w`,
//! imaginary-axis exponents `α` and near-unit root exponents `β`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::boundary::ClosureModel;
use super::roots::{decay_factor, match_nearest, RE_CLEAR};
use crate::error::{Error, Result};
use crate::parallel::{self, Execution};
use crate::sat::{assemble_1d, BoundaryKind};
use crate::sbp::build_sbp_d2;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-8;
/// Column-space membership threshold on the least-squares residual.
pub const COLSPACE_TOL: f64 = 1e-8;
pub const W_CAP: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub contour_radius: f64,
    pub contour_points: usize,
    pub scan_points: usize,
    /// Candidates from the coarse scan below this relative singular value
    /// are refined.
    pub scan_candidate: f64,
    /// A refined site is singular below this relative singular value.
    pub scan_threshold: f64,
    /// Exponents of the `ηh` ladder `2^{-k}` used for slope fits.
    pub fit_exponents: (i32, i32),
    pub exec: Execution,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            contour_radius: 0.05,
            contour_points: 64,
            scan_points: 4096,
            scan_candidate: 1e-2,
            scan_threshold: 1e-6,
            fit_exponents: (4, 12),
            exec: Execution::default(),
        }
    }
}

/// `C^{(m)}(0)` for `m = 0..=max_order` from the trapezoidal rule on a circle
/// of radius `ρ`, with the admissible roots continued analytically around it.
#[derive(Debug, Clone)]
pub struct ContourDerivatives {
    pub derivatives: Vec<DMatrix<Complex64>>,
    /// Distance between the tracked roots after one loop and at the start.
    pub closure_error: f64,
}

pub fn contour_derivatives(model: &ClosureModel, radius: f64, points: usize, max_order: usize) -> Result<ContourDerivatives> {
    let cp = model.problem();
    let start = Complex64::new(radius, 0.0);
    let first = cp.admissible_roots(start)?;
    let mut kappa = first.clone();
    let sub = 8;
    let r = model.size();
    let mut derivatives = vec![DMatrix::<Complex64>::zeros(r, r); max_order + 1];
    for k in 0..points {
        let theta = 2.0 * PI * k as f64 / points as f64;
        let s = Complex64::from_polar(radius, theta);
        if k > 0 {
            for j in 1..=sub {
                let t = 2.0 * PI * ((k - 1) as f64 + j as f64 / sub as f64) / points as f64;
                kappa = match_nearest(&kappa, &cp.all_roots(Complex64::from_polar(radius, t))?);
            }
        }
        let c = model.matrix_with_roots(s, &kappa);
        let mut sm = Complex64::new(1.0, 0.0);
        for (m, dm) in derivatives.iter_mut().enumerate() {
            *dm += &c / sm;
            sm *= s;
            let _ = m;
        }
    }
    for j in 1..=sub {
        let t = 2.0 * PI * ((points - 1) as f64 + j as f64 / sub as f64) / points as f64;
        kappa = match_nearest(&kappa, &cp.all_roots(Complex64::from_polar(radius, t))?);
    }
    let closure_error = kappa.iter().zip(&first).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let mut fact = 1.0;
    for (m, dm) in derivatives.iter_mut().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        *dm *= Complex64::new(fact / points as f64, 0.0);
    }
    Ok(ContourDerivatives { derivatives, closure_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginReport {
    /// Singular values of `C(0)`, decreasing.
    pub singular_values: Vec<f64>,
    pub singular: bool,
    /// `|(U* C^{(m)}(0) V)_{nn}|` for `m = 1, 2, …` until the first nonzero.
    pub pivots: Vec<f64>,
    pub t_c_in_column_space: bool,
    /// `None` when no derivative up to the cap is nonzero.
    pub w: Option<usize>,
    pub contour_closure_error: f64,
}

/// Decision tree for `w` at the origin.
pub fn origin_exponent(model: &ClosureModel, opts: &AnalysisOptions) -> Result<OriginReport> {
    let cd = contour_derivatives(model, opts.contour_radius, opts.contour_points, W_CAP)?;
    let t_c: Vec<Complex64> = model.t_c().iter().map(|&t| Complex64::new(t, 0.0)).collect();
    let mut report = classify_origin(&cd.derivatives, &t_c);
    report.contour_closure_error = cd.closure_error;
    Ok(report)
}

/// Applies the origin decision tree to `C(0), C'(0), …` and `T_C`.
pub fn classify_origin(derivs: &[DMatrix<Complex64>], t_c: &[Complex64]) -> OriginReport {
    let c0 = &derivs[0];
    let svd = c0.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    // Entries of C are O(1) at unit spacing, so rank decisions use an
    // absolute floor as well.
    let smax = singular_values[0].max(1.0);
    let n_idx = *order.last().unwrap();
    let singular = *singular_values.last().unwrap() <= RANK_TOL * smax;
    if !singular {
        return OriginReport {
            singular_values,
            singular,
            pivots: vec![],
            t_c_in_column_space: true,
            w: Some(0),
            contour_closure_error: 0.0,
        };
    }
    // Residual of T_C after projecting onto the range of C(0).
    let t = DVector::from_column_slice(t_c);
    let mut proj = t.clone();
    for &i in &order {
        if svd.singular_values[i] > RANK_TOL * smax {
            let col = u.column(i);
            let coef = col.dotc(&t);
            proj -= col * coef;
        }
    }
    let t_norm = t.norm();
    let t_c_in_column_space = proj.norm() <= COLSPACE_TOL * t_norm.max(f64::MIN_POSITIVE);
    let un = u.column(n_idx).clone_owned();
    let vn: DVector<Complex64> = v_t.row(n_idx).adjoint();
    let mut pivots = Vec::new();
    let mut w = None;
    for (m, dm) in derivs.iter().enumerate().skip(1) {
        let pivot = (un.adjoint() * dm * &vn)[(0, 0)].norm();
        let scale = dm.iter().fold(0.0f64, |a, z| a.max(z.norm())).max(smax);
        pivots.push(pivot);
        if pivot > RANK_TOL * scale {
            w = Some(if t_c_in_column_space { m - 1 } else { m });
            break;
        }
    }
    OriginReport { singular_values, singular, pivots, t_c_in_column_space, w, contour_closure_error: 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub xi: f64,
    pub det_abs: f64,
    /// `σ_min(C)/σ_max(C)`.
    pub rel_sigma_min: f64,
}

fn scan_point(model: &ClosureModel, s: Complex64) -> Result<ScanPoint> {
    let bs = model.build(s)?;
    let (min, max) = bs.singular_extremes();
    Ok(ScanPoint { xi: s.im, det_abs: bs.determinant().norm(), rel_sigma_min: min / max.max(f64::MIN_POSITIVE) })
}

/// Samples `C(iξ)` on `ξ_k = πk/n`, `k = 1..=n`.
pub fn imaginary_axis_scan(model: &ClosureModel, n: usize, exec: Execution) -> Result<Vec<ScanPoint>> {
    let xs: Vec<f64> = (1..=n).map(|k| PI * k as f64 / n as f64).collect();
    parallel::map(exec, &xs, |&xi| scan_point(model, Complex64::new(0.0, xi))).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSite {
    pub xi: f64,
    pub rel_sigma_min: f64,
    /// Fitted growth exponent of `‖C⁻¹(iξ + ηh)‖_max` in `1/(ηh)`.
    pub slope: f64,
    pub alpha: u32,
}

/// Rounds a fitted exponent up to an integer, forgiving fit noise of 0.05.
pub fn round_up_exponent(a: f64) -> u32 {
    (a - 0.05).ceil().max(0.0) as u32
}

fn eps_ladder(opts: &AnalysisOptions) -> Vec<f64> {
    (opts.fit_exponents.0..=opts.fit_exponents.1).map(|k| 2f64.powi(-k)).collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Refines local minima of the scan and fits `α` at the singular ones.
pub fn alpha_sites(model: &ClosureModel, scan: &[ScanPoint], opts: &AnalysisOptions) -> Result<Vec<AlphaSite>> {
    let mut sites = Vec::new();
    let eps = eps_ladder(opts);
    // The first sample only sees the tail of any singularity at the origin.
    for k in 1..scan.len() {
        let v = scan[k].rel_sigma_min;
        let left = scan[k - 1].rel_sigma_min;
        let right = scan.get(k + 1).map_or(f64::INFINITY, |p| p.rel_sigma_min);
        if !(v <= left && v <= right && v < opts.scan_candidate) {
            continue;
        }
        let lo = scan[k - 1].xi;
        let hi = scan.get(k + 1).map_or(scan[k].xi, |p| p.xi);
        let f = |xi: f64| scan_point(model, Complex64::new(0.0, xi)).map_or(f64::INFINITY, |p| p.rel_sigma_min);
        let xi = golden_min(f, lo, hi, 80);
        let rel = f(xi);
        if rel >= opts.scan_threshold {
            continue;
        }
        let norms: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let bs = model.build(Complex64::new(e, xi))?;
                Ok(bs.inverse()?.iter().fold(0.0f64, |m, z| m.max(z.norm())))
            })
            .collect::<Result<_>>()?;
        let slope = -loglog_slope(&eps, &norms);
        sites.push(AlphaSite { xi, rel_sigma_min: rel, slope, alpha: round_up_exponent(slope) });
    }
    Ok(sites)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSample {
    pub xi: f64,
    /// `|κ(iξ)|` of the root examined.
    pub modulus: f64,
    pub slope: f64,
    pub beta: u32,
}

/// `β` for every admissible root on the unit circle at `s̃ = iξ`.
pub fn beta_at(model: &ClosureModel, xi: f64, opts: &AnalysisOptions) -> Result<Vec<BetaSample>> {
    let cp = model.problem();
    let on_axis = cp.admissible_roots(Complex64::new(0.0, xi))?;
    let eps = eps_ladder(opts);
    let shifted: Vec<Vec<Complex64>> =
        eps.iter().map(|&e| cp.admissible_roots(Complex64::new(e, xi))).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for k0 in on_axis.iter().filter(|k| (k.norm() - 1.0).abs() < 1e-8) {
        let factors: Vec<f64> = shifted
            .iter()
            .map(|roots| {
                let nearest = roots.iter().min_by(|a, b| (*a - k0).norm().total_cmp(&(*b - k0).norm())).unwrap();
                decay_factor(*nearest)
            })
            .collect();
        let slope = -loglog_slope(&eps, &factors);
        out.push(BetaSample { xi, modulus: k0.norm(), slope, beta: round_up_exponent(slope) });
    }
    Ok(out)
}

/// `‖ζ̂‖_{1D,x}` at `s̃ = (η + iξ)h` over an `h` ladder and its fitted exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSweep {
    pub eta: f64,
    pub xi: f64,
    pub h: Vec<f64>,
    pub norm: Vec<f64>,
    /// `|σ₁|`, the coefficient of the near-unit root.
    pub sigma1: Vec<f64>,
    pub norm_slope: f64,
    pub sigma1_slope: f64,
}

impl GainSweep {
    /// Exponent of the error over the boundary truncation order `p`.
    pub fn gain(&self, p: usize) -> f64 {
        self.norm_slope - p as f64
    }
}

pub fn gain_sweep(model: &ClosureModel, eta: f64, xi: f64, hs: &[f64]) -> Result<GainSweep> {
    let mut norm = Vec::with_capacity(hs.len());
    let mut sigma1 = Vec::with_capacity(hs.len());
    for &h in hs {
        let bs = model.build(Complex64::new(eta * h, xi * h))?;
        let sol = bs.solve(h)?;
        norm.push(sol.norm);
        sigma1.push(sol.sigma[0]);
    }
    Ok(GainSweep {
        eta,
        xi,
        h: hs.to_vec(),
        norm_slope: loglog_slope(hs, &norm),
        sigma1_slope: loglog_slope(hs, &sigma1),
        norm,
        sigma1,
    })
}

/// Imaginary parts of the rays `s̃ = (1 + iξ)h` used for the measured gain.
pub const GAIN_RAYS: [f64; 3] = [0.0, 1.0, 3.0];

/// `h = 2^{-k}` ladder for the gain sweeps, fine enough that every ray is
/// well inside the asymptotic regime.
pub fn gain_ladder() -> Vec<f64> {
    (6..=12).map(|k| 2f64.powi(-k)).collect()
}

/// Sweeps along every ray; the smallest exponent bounds the gain.
pub fn measured_gain(model: &ClosureModel) -> Result<(f64, Vec<GainSweep>)> {
    let hs = gain_ladder();
    let sweeps: Vec<GainSweep> = GAIN_RAYS.iter().map(|&xi| gain_sweep(model, 1.0, xi, &hs)).collect::<Result<_>>()?;
    let gain = sweeps.iter().map(|g| g.gain(model.p())).fold(f64::INFINITY, f64::min);
    Ok((gain, sweeps))
}

/// `q = min(2p, p + gain)` for interior order `2p` and boundary order `p`.
pub fn rate_from_gain(order: usize, p: usize, gain: f64) -> f64 {
    (order as f64).min(p as f64 + gain)
}

/// Rounds down to a multiple of one half, forgiving fit noise of 0.1.
/// Fitted exponents approach their limit from above while a decaying
/// higher-order term is still visible, so rounding down is the safe side.
pub fn half_floor(x: f64) -> f64 {
    (2.0 * (x + 0.1)).floor() / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityReport {
    pub order: usize,
    pub p: usize,
    pub size: usize,
    pub d: usize,
    pub l: usize,
    pub origin: OriginReport,
    pub w: Option<usize>,
    /// Set when `w` exceeds the cap: the closure is unstable or ill posed.
    pub flagged: bool,
    pub alpha: Vec<AlphaSite>,
    pub beta: Vec<BetaSample>,
    /// `b = 2 max α + max β`.
    pub b: u32,
    /// `g = p + 2 − w`.
    pub g: Option<f64>,
    /// `m = 1 + 2w + b`.
    pub m: Option<f64>,
    /// Smallest fitted gain over the rays.
    pub measured_gain: f64,
    /// `measured_gain` rounded down to a half.
    pub predicted_gain: f64,
    /// `min(2p, p + gain)` with `2p` the interior order.
    pub predicted_rate_q: f64,
    pub sweeps: Vec<GainSweep>,
}

/// Probe points for `β` away from singular sites.
pub const BETA_PROBES: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.5];

pub fn singularity_analysis(model: &ClosureModel, order: usize, opts: &AnalysisOptions) -> Result<(SingularityReport, Vec<ScanPoint>)> {
    if opts.contour_radius < RE_CLEAR {
        return Err(Error::Config(format!("contour radius must be at least {RE_CLEAR}")));
    }
    let origin = origin_exponent(model, opts)?;
    let scan = imaginary_axis_scan(model, opts.scan_points, opts.exec)?;
    let alpha = alpha_sites(model, &scan, opts)?;
    let mut beta = Vec::new();
    for xi in BETA_PROBES.iter().copied().chain(alpha.iter().map(|a| a.xi)) {
        beta.extend(beta_at(model, xi, opts)?);
    }
    let max_alpha = alpha.iter().map(|a| a.alpha).max().unwrap_or(0);
    let max_beta = beta.iter().map(|b| b.beta).max().unwrap_or(0);
    let b = 2 * max_alpha + max_beta;
    let w = origin.w;
    let p = model.p();
    let (measured_gain, sweeps) = measured_gain(model)?;
    let report = SingularityReport {
        order,
        p,
        size: model.size(),
        d: model.d(),
        l: model.l(),
        w,
        flagged: w.is_none(),
        g: w.map(|w| (p + 2) as f64 - w as f64),
        m: w.map(|w| (1 + 2 * w) as f64 + b as f64),
        origin,
        alpha,
        beta,
        b,
        measured_gain,
        predicted_gain: half_floor(measured_gain),
        predicted_rate_q: rate_from_gain(order, p, half_floor(measured_gain)),
        sweeps,
    };
    Ok((report, scan))
}

/// Analyzer output consumed by the convergence lab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerReport {
    pub scheme: String,
    pub order: usize,
    pub bc: BoundaryKind,
    pub penalty_factor: f64,
    pub w: Option<usize>,
    pub flagged: bool,
    pub alpha: Vec<AlphaSite>,
    pub beta: Vec<BetaSample>,
    pub measured_gain: f64,
    pub predicted_gain: f64,
    pub predicted_rate_q: f64,
    pub det_scan: Vec<ScanPoint>,
    pub details: SingularityReport,
}

/// Number of scan samples kept in the report.
pub const DET_SCAN_SAMPLES: usize = 64;

/// Builds the closure on `n` points and runs the full analysis.
pub fn analyze(order: usize, bc: BoundaryKind, penalty_factor: f64, n: usize, opts: &AnalysisOptions) -> Result<AnalyzerReport> {
    let op = build_sbp_d2(order, n, 1.0 / (n - 1) as f64)?;
    let sd = assemble_1d(&op, bc, penalty_factor)?;
    let model = ClosureModel::from_semidisc(&sd)?;
    let (details, scan) = singularity_analysis(&model, order, opts)?;
    let stride = (scan.len() / DET_SCAN_SAMPLES).max(1);
    Ok(AnalyzerReport {
        scheme: format!("sbp-sat-{bc}"),
        order,
        bc,
        penalty_factor,
        w: details.w,
        flagged: details.flagged,
        alpha: details.alpha.clone(),
        beta: details.beta.clone(),
        measured_gain: details.measured_gain,
        predicted_gain: details.predicted_gain,
        predicted_rate_q: details.predicted_rate_q,
        det_scan: scan.iter().step_by(stride).copied().collect(),
        details,
    })
}
