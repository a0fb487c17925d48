//! Refinement studies, corner experiments and rate bookkeeping.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corner::CornerPerturbation;
use crate::error::{Error, Result};
use crate::normal_mode::ClosureModel;
use crate::parallel::{self, Execution};
use crate::sat::{assemble_1d, BoundaryData2D, BoundaryKind};
use crate::sbp::build_sbp_d2;
use crate::solution::{sample_forcing, sample_solution, Grid2D, ManufacturedSolution};
use crate::solver::{build_scheme_2d, simulate, SimulationConfig};

/// Observed rate between two consecutive levels with halved spacing:
/// `log(e_h / e_{2h}) / log(1/2)`.
pub fn rate(coarse: f64, fine: f64) -> f64 {
    (fine / coarse).ln() / 0.5f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub l2_error: f64,
    /// Rate against the previous, coarser row.
    pub rate: Option<f64>,
}

/// Acceptance band for a headline rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBand {
    pub min: f64,
    pub max: f64,
}

impl RateBand {
    pub fn around(center: f64, tol: f64) -> Self {
        Self { min: center - tol, max: center + tol }
    }

    pub fn at_least(min: f64) -> Self {
        Self { min, max: f64::INFINITY }
    }

    pub fn at_most(max: f64) -> Self {
        Self { min: f64::NEG_INFINITY, max }
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.min && q <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub config: SimulationConfig,
    /// Ordered by decreasing `h`.
    pub rows: Vec<RateRow>,
    pub predicted: Option<f64>,
    pub band: Option<RateBand>,
}

impl ConvergenceReport {
    /// Rate from the last two refinements.
    pub fn headline(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.rate)
    }

    /// `None` when no band was attached.
    pub fn passed(&self) -> Option<bool> {
        let band = self.band?;
        Some(self.headline().is_some_and(|q| band.contains(q)))
    }

    pub fn with_band(mut self, band: RateBand) -> Self {
        self.band = Some(band);
        self
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "N,h,l2_error,rate")?;
        for r in &self.rows {
            let rate = r.rate.map_or(String::new(), |q| format!("{q:.16e}"));
            writeln!(out, "{},{:.16e},{:.16e},{}", r.n, r.h, r.l2_error, rate)?;
        }
        Ok(())
    }
}

/// Parses the CSV written by [`ConvergenceReport::write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<RateRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("N,h,l2_error,rate") {
        return Err(Error::Config("missing CSV header".into()));
    }
    let bad = |l: &str| Error::Config(format!("malformed CSV row `{l}`"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad(l));
            }
            Ok(RateRow {
                n: f[0].parse().map_err(|_| bad(l))?,
                h: f[1].parse().map_err(|_| bad(l))?,
                l2_error: f[2].parse().map_err(|_| bad(l))?,
                rate: if f[3].is_empty() { None } else { Some(f[3].parse().map_err(|_| bad(l))?) },
            })
        })
        .collect()
}

fn rows_from_errors(levels: &[(usize, f64, f64)]) -> Vec<RateRow> {
    let mut rows: Vec<RateRow> = Vec::with_capacity(levels.len());
    for &(n, h, e) in levels {
        let rate = rows.last().map(|prev| rate(prev.l2_error, e));
        rows.push(RateRow { n, h, l2_error: e, rate });
    }
    rows
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::Config("a refinement study needs at least two levels".into()));
    }
    for w in levels.windows(2) {
        if w[1] != 2 * w[0] - 1 {
            return Err(Error::Config(format!("levels must halve h: {} is not followed by {}", w[0], 2 * w[0] - 1)));
        }
    }
    Ok(())
}

/// Runs one simulation per level, levels concurrently under `exec`.
pub fn run_refinement_study(cfg: &SimulationConfig, levels: &[usize], exec: Execution) -> Result<ConvergenceReport> {
    check_levels(levels)?;
    let results = parallel::map(exec, levels, |&n| {
        let level = SimulationConfig { n, ..cfg.clone() };
        simulate(&level).map(|r| (n, r.h, r.l2_error))
    });
    let levels: Vec<(usize, f64, f64)> = results.into_iter().collect::<Result<_>>()?;
    if let Some(&(n, _, e)) = levels.iter().find(|l| !l.2.is_finite()) {
        return Err(Error::Study(format!("level N = {n} produced a non-finite error {e}")));
    }
    let experiment = format!(
        "{}d-{}-order{}{}",
        cfg.dim,
        if cfg.bc_x == cfg.bc_y { cfg.bc_x.to_string() } else { format!("{}-{}", cfg.bc_x, cfg.bc_y) },
        cfg.order,
        if cfg.corner.is_some() { "-corner" } else { "" }
    );
    let predicted = if cfg.corner.is_some() {
        predicted_corner_rate(cfg.order, cfg.bc_x).ok()
    } else if cfg.bc_x == cfg.bc_y {
        predicted_rate(cfg.order, cfg.bc_x, PenaltyRegime::from_factor(cfg.penalty_factor)).ok()
    } else {
        None
    };
    Ok(ConvergenceReport { experiment, config: cfg.clone(), rows: rows_from_errors(&levels), predicted, band: None })
}

/// Refinement study with erroneous west data next to both corners.
pub fn run_corner_experiment(cfg: &SimulationConfig, levels: &[usize], exec: Execution) -> Result<ConvergenceReport> {
    if cfg.corner.is_none() {
        return Err(Error::Config("corner experiment needs a corner perturbation".into()));
    }
    if cfg.dim != 2 {
        return Err(Error::Config("corner experiment is two dimensional".into()));
    }
    run_refinement_study(cfg, levels, exec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyRegime {
    /// `ι = ι₀`.
    Critical,
    /// `ι > ι₀`.
    Above,
}

impl PenaltyRegime {
    pub fn from_factor(factor: f64) -> Self {
        if (factor - 1.0).abs() < 1e-12 {
            PenaltyRegime::Critical
        } else {
            PenaltyRegime::Above
        }
    }
}

fn boundary_order(order: usize) -> Result<usize> {
    match order {
        2 | 4 | 6 => Ok(order / 2),
        _ => Err(Error::Config(format!("no rate prediction for order {order}"))),
    }
}

/// `q = min(2p, p + gain)` with the gains of the one-dimensional analysis.
pub fn predicted_rate(order: usize, kind: BoundaryKind, regime: PenaltyRegime) -> Result<f64> {
    let p = boundary_order(order)?;
    let gain = match (kind, regime, p) {
        (BoundaryKind::Dirichlet, PenaltyRegime::Critical, _) => 0.5,
        (_, _, 3) => 2.5,
        (BoundaryKind::Neumann, _, 1) => 1.0,
        _ => 2.0,
    };
    Ok((order as f64).min(p as f64 + gain))
}

/// Origin exponent `w` for corner-perturbed data: the Neumann perturbation
/// breaks the structure that keeps `T_C` in the range of `C(0)`.
pub fn corner_w(kind: BoundaryKind) -> usize {
    match kind {
        BoundaryKind::Dirichlet => 0,
        BoundaryKind::Neumann => 1,
    }
}

/// Corner truncation `O(h^{p−2})` gains three orders minus `w`.
pub fn predicted_corner_rate(order: usize, kind: BoundaryKind) -> Result<f64> {
    let p = boundary_order(order)?;
    Ok(p as f64 + 1.0 - corner_w(kind) as f64)
}

/// `c_p` from the largest leading truncation coefficient of the closure, so
/// the injected corner error matches the size of the scheme's own boundary
/// truncation error.
pub fn calibrate_c_p(order: usize, kind: BoundaryKind, penalty_factor: f64) -> Result<f64> {
    let op = build_sbp_d2(order, 41, 1.0 / 40.0)?;
    let model = ClosureModel::from_semidisc(&assemble_1d(&op, kind, penalty_factor)?)?;
    Ok(model.t_c().iter().fold(0.0f64, |m, a| m.max(a.abs())))
}

/// Calibrated corner perturbation for `cfg`'s order and west boundary.
pub fn corner_for(cfg: &SimulationConfig) -> Result<CornerPerturbation> {
    Ok(CornerPerturbation::new(cfg.bc_x, cfg.order, calibrate_c_p(cfg.order, cfg.bc_x, cfg.penalty_factor)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    Interior,
    Closure,
    Corner,
}

/// Semi-discrete residual of the exact solution at `t = 0`, per grid point.
#[derive(Debug, Clone)]
pub struct TruncationField {
    pub n: usize,
    pub h: f64,
    pub residual: Vec<f64>,
    pub band: Vec<Band>,
}

pub fn truncation_field(cfg: &SimulationConfig) -> Result<TruncationField> {
    cfg.validate()?;
    if cfg.dim != 2 {
        return Err(Error::Config("truncation probe is two dimensional".into()));
    }
    let sd = build_scheme_2d(cfg)?;
    let ms = ManufacturedSolution::from_choice(cfg.solution);
    let grid = Grid2D::unit_square(cfg.n);
    let u = sample_solution(&ms, &grid, 0.0).values;
    let f = sample_forcing(&ms, &grid, 0.0).values;
    let mut data: BoundaryData2D = ms.boundary_data(cfg.bc_x, cfg.bc_y, &grid, 0.0);
    let corner_sites = match &cfg.corner {
        Some(c) => {
            c.apply(&mut data.west, grid.h);
            c.sites(grid.ny)
        }
        None => vec![],
    };
    let lu = sd.rhs(&u, &data, Some(&f))?;
    let w2 = ms.omega * ms.omega;
    let residual: Vec<f64> = lu.iter().zip(&u).map(|(l, u)| l + w2 * u).collect();
    let (wx, wy) = (sd.x().q().top_rows(), sd.y().q().top_rows());
    let lift = sd.x().lift().len();
    let (nx, ny) = (grid.nx, grid.ny);
    let band = (0..nx)
        .flat_map(|j| (0..ny).map(move |i| (j, i)))
        .map(|(j, i)| {
            if j < lift && corner_sites.contains(&i) {
                Band::Corner
            } else if j < wx || j + wx >= nx || i < wy || i + wy >= ny {
                Band::Closure
            } else {
                Band::Interior
            }
        })
        .collect();
    Ok(TruncationField { n: cfg.n, h: grid.h, residual, band })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSlope {
    pub band: Band,
    pub coarse: f64,
    pub fine: f64,
    pub slope: f64,
}

/// Largest residual per band on `n` and `2n − 1` points and the implied
/// order in `h`.
pub fn truncation_probe(cfg: &SimulationConfig) -> Result<Vec<BandSlope>> {
    let coarse = truncation_field(cfg)?;
    let fine = truncation_field(&SimulationConfig { n: 2 * cfg.n - 1, ..cfg.clone() })?;
    let max_in = |f: &TruncationField, b: Band| {
        f.residual.iter().zip(&f.band).filter(|(_, &fb)| fb == b).map(|(r, _)| r.abs()).fold(None, |m: Option<f64>, r| {
            Some(m.map_or(r, |m| m.max(r)))
        })
    };
    Ok([Band::Interior, Band::Closure, Band::Corner]
        .into_iter()
        .filter_map(|b| {
            let (c, f) = (max_in(&coarse, b)?, max_in(&fine, b)?);
            Some(BandSlope { band: b, coarse: c, fine: f, slope: rate(c, f) })
        })
        .collect())
}

/// `‖u(2c) − u(0)‖ / ‖u(c) − u(0)‖` at one resolution; two by linearity.
pub fn superposition_ratio(cfg: &SimulationConfig) -> Result<f64> {
    let corner = cfg.corner.ok_or_else(|| Error::Config("superposition check needs a corner perturbation".into()))?;
    let with = |c_p: f64| {
        let run = SimulationConfig { corner: Some(CornerPerturbation { c_p, ..corner }), ..cfg.clone() };
        simulate(&run).map(|r| r.u)
    };
    let base = with(0.0)?;
    let one = with(corner.c_p)?;
    let two = with(2.0 * corner.c_p)?;
    let dist = |a: &[f64]| a.iter().zip(&base).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    Ok(dist(&two) / dist(&one))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sat::BoundaryKind::{Dirichlet, Neumann};

    #[test]
    fn rate_of_a_quartered_error_is_two() {
        assert_eq!(rate(1e-2, 2.5e-3), 2.0);
        let rows = rows_from_errors(&[(41, 0.025, 1e-2), (81, 0.0125, 2.5e-3)]);
        assert_eq!(rows[0].rate, None);
        assert_eq!(rows[1].rate, Some(2.0));
    }

    #[test]
    fn table_of_rates() {
        let q = |o, k, r| predicted_rate(o, k, r).unwrap();
        use PenaltyRegime::*;
        assert_eq!([q(2, Dirichlet, Critical), q(4, Dirichlet, Critical), q(6, Dirichlet, Critical)], [1.5, 2.5, 3.5]);
        assert_eq!([q(2, Dirichlet, Above), q(4, Dirichlet, Above), q(6, Dirichlet, Above)], [2.0, 4.0, 5.5]);
        assert_eq!([q(2, Neumann, Above), q(4, Neumann, Above), q(6, Neumann, Above)], [2.0, 4.0, 5.5]);
        assert!(predicted_rate(8, Neumann, Above).is_err());
        assert_eq!(PenaltyRegime::from_factor(1.0), Critical);
        assert_eq!(PenaltyRegime::from_factor(1.2), Above);
    }

    #[test]
    fn corner_rates() {
        let d: Vec<f64> = [2, 4, 6].iter().map(|&o| predicted_corner_rate(o, Dirichlet).unwrap()).collect();
        let n: Vec<f64> = [2, 4, 6].iter().map(|&o| predicted_corner_rate(o, Neumann).unwrap()).collect();
        assert_eq!(d, [2.0, 3.0, 4.0]);
        assert_eq!(n, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn bands() {
        assert!(RateBand::around(4.0, 0.2).contains(4.15));
        assert!(!RateBand::around(4.0, 0.2).contains(4.25));
        assert!(RateBand::at_least(5.2).contains(5.75));
        assert!(!RateBand::at_most(2.8).contains(2.9));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows = rows_from_errors(&[(41, 0.025, 1.234_567_890_123_456_7e-3), (81, 0.0125, 3.0e-4 / 3.0)]);
        let report = ConvergenceReport {
            experiment: "x".into(),
            config: SimulationConfig::default(),
            rows: rows.clone(),
            predicted: None,
            band: None,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("N,h,l2_error,rate\n41,"));
        assert_eq!(read_csv(&text).unwrap(), rows);
        assert!(read_csv("n,h\n").is_err());
    }

    #[test]
    fn levels_must_halve_h() {
        assert!(check_levels(&[41, 81, 161]).is_ok());
        assert!(check_levels(&[41, 80]).is_err());
        assert!(check_levels(&[41]).is_err());
    }

    #[test]
    fn calibrated_constants_are_positive() {
        for order in [2, 4, 6] {
            for kind in [Dirichlet, Neumann] {
                let c = calibrate_c_p(order, kind, 1.2).unwrap();
                assert!(c > 0.0 && c.is_finite());
            }
        }
    }

    #[test]
    fn truncation_bands_have_expected_orders() {
        let cfg = SimulationConfig { order: 4, n: 41, ..Default::default() };
        let slopes = truncation_probe(&cfg).unwrap();
        let get = |b| slopes.iter().find(|s| s.band == b).unwrap().slope;
        assert!((get(Band::Interior) - 4.0).abs() < 0.3, "{slopes:?}");
        assert!((get(Band::Closure) - 2.0).abs() < 0.3, "{slopes:?}");
        let cfg = SimulationConfig { corner: Some(corner_for(&cfg).unwrap()), ..cfg };
        let slopes = truncation_probe(&cfg).unwrap();
        let corner = slopes.iter().find(|s| s.band == Band::Corner).unwrap();
        assert!((corner.slope - 0.0).abs() < 0.3, "{slopes:?}");
    }

    #[test]
    fn zero_perturbation_matches_plain_study() {
        let cfg = SimulationConfig { order: 2, tf: 0.2, ..Default::default() };
        let plain = run_refinement_study(&cfg, &[21, 41], Execution::Sequential).unwrap();
        let zero = SimulationConfig { corner: Some(CornerPerturbation::new(Dirichlet, 2, 0.0)), ..cfg };
        let perturbed = run_corner_experiment(&zero, &[21, 41], Execution::Sequential).unwrap();
        let e = |r: &ConvergenceReport| r.rows.iter().map(|r| r.l2_error).collect::<Vec<_>>();
        assert_eq!(e(&plain), e(&perturbed));
    }

    #[test]
    fn corner_error_is_linear_in_amplitude() {
        for kind in [Dirichlet, Neumann] {
            let cfg = SimulationConfig { order: 4, n: 21, tf: 0.5, ..Default::default() }.with_bc(kind);
            let cfg = SimulationConfig { corner: Some(corner_for(&cfg).unwrap()), ..cfg };
            let ratio = superposition_ratio(&cfg).unwrap();
            assert!((ratio - 2.0).abs() < 0.1, "{kind}: {ratio}");
        }
    }
}
