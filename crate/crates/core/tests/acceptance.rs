//! Acceptance suite. Each test prints one `[k] … PASS|FAIL` line followed by
//! the individual checks behind it.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wavelab::lab::{corner_for, run_corner_experiment, run_refinement_study, RateBand};
use wavelab::normal_mode::bounds::{corner_log_bound, CornerSetup};
use wavelab::normal_mode::roots::decay_factor;
use wavelab::normal_mode::{singularity_analysis, AnalysisOptions, ClosureModel};
use wavelab::sat::assemble_dirichlet_unchecked;
use wavelab::solver::SimulationConfig;
use wavelab::spectral::{diagonalize, diagonalize_semidisc, shift, standard_neumann_eigenvalue, standard_neumann_matrix};
use wavelab::BoundaryKind::{self, Dirichlet, Neumann};
use wavelab::{assemble_1d, build_sbp_d2, check_energy_condition, compute_iota0, verify_sbp_properties, Execution};

const LADDER: [usize; 4] = [41, 81, 161, 321];

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<(String, bool)>,
    start: Instant,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new(), start: Instant::now() }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    fn finish(self, budget_s: Option<f64>) {
        let elapsed = self.start.elapsed().as_secs_f64();
        let in_time = budget_s.is_none_or(|b| elapsed < b);
        let ok = in_time && self.checks.iter().all(|c| c.1);
        let mut text = format!("[{}] {}: {} ({elapsed:.1} s)\n", self.id, self.title, if ok { "PASS" } else { "FAIL" });
        for (label, pass) in &self.checks {
            text += &format!("    {} {label}\n", if *pass { "ok  " } else { "FAIL" });
        }
        if !in_time {
            text += &format!("    FAIL runtime over {} s\n", budget_s.unwrap());
        }
        println!("{text}");
        assert!(ok, "criterion {} failed", self.id);
    }
}

fn op(order: usize, n: usize) -> wavelab::SbpD2Operator {
    build_sbp_d2(order, n, 1.0 / (n - 1) as f64).unwrap()
}

#[test]
fn sbp_property_suite() {
    let mut c = Criterion::new(1, "SBP property suite");
    for order in [2, 4, 6] {
        let r = verify_sbp_properties(&op(order, 61));
        let p = order / 2;
        c.check(format!("order {order}: H positive ({} bad entries)", r.nonpositive_norm_entries), r.nonpositive_norm_entries == 0);
        c.check(format!("order {order}: M asymmetry {:.1e}", r.m_asymmetry), r.m_asymmetry <= 1e-12 * r.m_max_abs);
        c.check(format!("order {order}: eigmin sym(M) {:.2e}", r.m_min_eigenvalue), r.m_min_eigenvalue >= -1e-10);
        let interior_ok = r.exactness.iter().filter(|e| e.degree <= order + 1).all(|e| e.interior_residual <= 1e-8);
        let boundary_ok = r.exactness.iter().filter(|e| e.degree <= p + 1).all(|e| e.boundary_residual <= 1e-8);
        c.check(format!("order {order}: interior exact to degree {}", order + 1), interior_ok);
        c.check(format!("order {order}: boundary exact to degree {}", p + 1), boundary_ok);
        c.check(format!("order {order}: report clean {:?}", r.failures), r.passed());
    }
    c.finish(Some(5.0));
}

#[test]
fn energy_assumption() {
    let mut c = Criterion::new(2, "PQ symmetric negative semidefinite");
    for order in [2, 4, 6] {
        let o = op(order, 41);
        let r = check_energy_condition(&assemble_1d(&o, Neumann, 1.0).unwrap());
        c.check(format!("order {order} neumann: eig max {:.2e}", r.eig_max), r.passed);
        let r = check_energy_condition(&assemble_1d(&o, Dirichlet, 1.2).unwrap());
        c.check(format!("order {order} dirichlet 1.2 iota0: eig max {:.2e}", r.eig_max), r.passed);
        let iota0 = compute_iota0(&o).unwrap();
        let r = check_energy_condition(&assemble_dirichlet_unchecked(&o, 0.5 * iota0).unwrap());
        c.check(format!("order {order} dirichlet 0.5 iota0 rejected: eig max {:.2e}", r.eig_max), !r.passed);
    }
    c.finish(Some(10.0));
}

#[test]
fn spectral_oracles() {
    let mut c = Criterion::new(3, "spectral oracles");
    for n in [21, 41, 81] {
        let h = 1.0 / (n - 1) as f64;
        let s = diagonalize(&standard_neumann_matrix(n), &vec![1.0; n], h).unwrap();
        let worst = (1..=n)
            .map(|r| {
                let exact = standard_neumann_eigenvalue(n, h, r);
                (s.lambda[r - 1] - exact).abs() / exact.max(1.0)
            })
            .fold(0.0, f64::max);
        c.check(format!("closed-form second-order Neumann eigenvalues, N = {n}: rel err {worst:.1e}"), worst <= 1e-10);
    }
    for order in [4, 6] {
        let spectra: Vec<_> =
            [41, 81, 161].iter().map(|&n| diagonalize_semidisc(&assemble_1d(&op(order, n), Neumann, 1.0).unwrap()).unwrap()).collect();
        for r in 2..=5 {
            let target = (r - 1) as f64 * std::f64::consts::PI;
            let errs: Vec<f64> = spectra.iter().map(|s| (s.sqrt_lambda()[r - 1] - target).abs()).collect();
            let rates: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
            let shown: Vec<String> = errs.iter().map(|e| format!("{e:.1e}")).collect();
            c.check(
                format!("order {order}, r = {r}: sqrt(lambda) errors {shown:?}, rates {rates:.2?}"),
                rates.iter().all(|&q| q >= 2.0),
            );
        }
        let conds: Vec<f64> = spectra.iter().map(|s| s.cond).collect();
        let spread = conds.iter().cloned().fold(0.0, f64::max) / conds.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
        c.check(format!("order {order}: cond(Phi) {conds:.4?} varies {:.1}%", 100.0 * spread), spread < 0.10);
    }
    c.finish(Some(30.0));
}

fn study(c: &mut Criterion, cfg: SimulationConfig, band: RateBand, corner: bool) {
    let label = format!(
        "order {} {} pf {}{}",
        cfg.order,
        cfg.bc_x,
        cfg.penalty_factor,
        if corner { " corner" } else { "" }
    );
    let result = if corner {
        let cfg = SimulationConfig { corner: Some(corner_for(&cfg).unwrap()), ..cfg };
        run_corner_experiment(&cfg, &LADDER, Execution::Parallel)
    } else {
        run_refinement_study(&cfg, &LADDER, Execution::Parallel)
    };
    match result {
        Ok(r) => {
            let report = r.with_band(band);
            let errors: Vec<String> = report.rows.iter().map(|r| format!("{:.3e}", r.l2_error)).collect();
            let q = report.headline().unwrap_or(f64::NAN);
            c.check(
                format!("{label}: rate {q:.3} in [{}, {}], errors {errors:?}", band.min, band.max),
                report.passed() == Some(true),
            );
        }
        Err(e) => c.check(format!("{label}: {e}"), false),
    }
}

fn base(order: usize, kind: BoundaryKind) -> SimulationConfig {
    SimulationConfig { order, ..Default::default() }.with_bc(kind)
}

#[test]
fn two_dimensional_convergence() {
    let mut c = Criterion::new(4, "2D convergence rates");
    for kind in [Dirichlet, Neumann] {
        study(&mut c, base(2, kind), RateBand::around(2.0, 0.1), false);
        study(&mut c, base(4, kind), RateBand::around(4.0, 0.2), false);
        study(&mut c, base(6, kind), RateBand::at_least(5.2), false);
    }
    study(&mut c, SimulationConfig { penalty_factor: 1.0, ..base(4, Dirichlet) }, RateBand::at_most(2.8), false);
    c.finish(None);
}

#[test]
fn corner_truncation_experiment() {
    let mut c = Criterion::new(5, "corner experiment rates");
    for (order, tol) in [(2, 0.15), (4, 0.2), (6, 0.25)] {
        study(&mut c, base(order, Dirichlet), RateBand::around((order / 2 + 1) as f64, tol), true);
    }
    for (order, tol) in [(2, 0.1), (4, 0.15), (6, 0.2)] {
        study(&mut c, base(order, Neumann), RateBand::around((order / 2) as f64, tol), true);
    }
    c.finish(None);
}

fn closure(order: usize, kind: BoundaryKind, factor: f64) -> ClosureModel {
    ClosureModel::from_semidisc(&assemble_1d(&op(order, 41), kind, factor).unwrap()).unwrap()
}

#[test]
fn normal_mode_classification() {
    let mut c = Criterion::new(6, "normal-mode classification");
    c.check(format!("order 2 dirichlet system size {}", closure(2, Dirichlet, 1.2).size()), closure(2, Dirichlet, 1.2).size() == 3);
    c.check(format!("order 2 neumann system size {}", closure(2, Neumann, 1.0).size()), closure(2, Neumann, 1.0).size() == 1);
    let opts = AnalysisOptions::default();
    for (order, w) in [(2, 1), (4, 0)] {
        let (r, _) = singularity_analysis(&closure(order, Neumann, 1.0), order, &opts).unwrap();
        c.check(format!("order {order} neumann: w = {:?}", r.w), r.w == Some(w));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for order in [2, 4, 6] {
        for (kind, factor) in [(Dirichlet, 1.2), (Neumann, 1.0)] {
            let m = closure(order, kind, factor);
            let mut smallest = f64::INFINITY;
            let mut failures = 0;
            for _ in 0..200 {
                let s = Complex64::new(rng.gen_range(1e-2..2.0), rng.gen_range(-3.0..3.0));
                match m.build(s) {
                    Ok(bs) => smallest = smallest.min(bs.determinant().norm()),
                    Err(_) => failures += 1,
                }
            }
            c.check(
                format!("order {order} {kind}: min |det C| {smallest:.2e} over 200 samples"),
                failures == 0 && smallest >= 1e-12,
            );
        }
    }
    c.finish(Some(60.0));
}

#[test]
fn root_bounds() {
    let mut c = Criterion::new(7, "root bounds");
    for order in [2, 4, 6] {
        let m = closure(order, Dirichlet, 1.2);
        let values: Vec<f64> = (4..=10)
            .map(|k| {
                let h = 2f64.powi(-k);
                let roots = m.problem().admissible_roots(Complex64::new(h, 0.0)).unwrap();
                let k1 = roots.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
                h * decay_factor(k1)
            })
            .collect();
        let spread = values.iter().cloned().fold(0.0, f64::max) / values.iter().cloned().fold(f64::INFINITY, f64::min);
        c.check(format!("order {order}: eta h/(1-|k1|^2) spread {spread:.3} over h = 2^-4..2^-10"), spread <= 2.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    for _ in 0..100_000 {
        let delta: f64 = rng.gen_range(0.0..2.0);
        let s = Complex64::new(delta + rng.gen_range(0.0..3.0), rng.gen_range(-10.0..10.0));
        let gamma: f64 = rng.gen_range(0.0..50.0);
        if shift(s, gamma, 1.0).s_plus.re < delta {
            violations += 1;
        }
    }
    c.check(format!("shifted dual keeps Re >= delta: {violations} violations in 1e5 samples"), violations == 0);
    for (order, kind) in [(2, Neumann), (4, Neumann), (6, Neumann), (2, Dirichlet)] {
        let setup = CornerSetup { order, x: kind, y: kind, penalty_factor: 1.2, eta: 1.0, delta: 0.5 };
        let fit = corner_log_bound(&setup, &LADDER).unwrap();
        let sums: Vec<f64> = fit.levels.iter().map(|l| l.small_sum).collect();
        c.check(
            format!("order {order} {kind}: small-r sums {sums:.3?} ~ {:.3} log(1/h) + {:.3}, residual {:.1}%", fit.k, fit.c, 100.0 * fit.residual),
            fit.residual < 0.10 && fit.k > 0.0,
        );
    }
    c.finish(Some(60.0));
}
