//! Classical RK4 for `u_tt = L(t) u`, written as the first-order system
//! `(u, v = u_t)`.

use serde::{Deserialize, Serialize};

use crate::corner::CornerPerturbation;
use crate::error::{Error, Result};
use crate::parallel::Execution;
use crate::sat::{assemble_1d, assemble_2d, BoundaryData2D, BoundaryKind, SemiDiscretization1D, SemiDiscretization2D};
use crate::sbp::{build_sbp_d2, min_points, Order};
use crate::solution::{l2_error, sample_solution, sample_velocity, Grid2D, ManufacturedSolution, SolutionChoice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dim: usize,
    pub order: usize,
    pub bc_x: BoundaryKind,
    pub bc_y: BoundaryKind,
    pub n: usize,
    pub tf: f64,
    /// `Δt = cfl · h`.
    pub cfl: f64,
    /// Dirichlet penalty as a multiple of the stability threshold.
    pub penalty_factor: f64,
    pub solution: SolutionChoice,
    pub corner: Option<CornerPerturbation>,
    pub timing: DataTiming,
    /// Reserved; the core is deterministic.
    pub seed: u64,
    /// Parallelism inside one right-hand-side evaluation.
    pub exec: Execution,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            order: 2,
            bc_x: BoundaryKind::Dirichlet,
            bc_y: BoundaryKind::Dirichlet,
            n: 41,
            tf: 2.0,
            cfl: 0.1,
            penalty_factor: 1.2,
            solution: SolutionChoice::Smooth,
            corner: None,
            timing: DataTiming::default(),
            seed: 0,
            exec: Execution::Sequential,
        }
    }
}

impl SimulationConfig {
    pub fn with_bc(mut self, kind: BoundaryKind) -> Self {
        self.bc_x = kind;
        self.bc_y = kind;
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn validate(&self) -> Result<()> {
        let order = Order::from_interior(self.order)?;
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(Error::Config(format!("cfl must be positive, got {}", self.cfl)));
        }
        if !(self.tf > 0.0 && self.tf.is_finite()) {
            return Err(Error::Config(format!("final time must be positive, got {}", self.tf)));
        }
        if !(self.penalty_factor > 0.0 && self.penalty_factor.is_finite()) {
            return Err(Error::Config(format!("penalty factor must be positive, got {}", self.penalty_factor)));
        }
        let min = min_points(order);
        if self.n < min {
            return Err(Error::GridTooSmall { order: self.order, n: self.n, min });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub l2_error: f64,
    pub u: Vec<f64>,
    pub exact: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Rk4Output {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: usize,
}

/// Number of steps and the length of the final one for `Δt` up to `tf`.
pub fn step_plan(tf: f64, dt: f64) -> (usize, f64) {
    let steps = ((tf / dt) - 1e-9).ceil().max(1.0) as usize;
    let last = tf - (steps - 1) as f64 * dt;
    (steps, last)
}

/// How boundary data enters the RK4 stages.
///
/// `StageTime` evaluates `g(t_n + c_i k)` at each stage. For stiff SAT terms
/// this loses accuracy near the boundary as `h -> 0` at fixed `k/h`.
/// `StageConsistent` instead feeds the stage the Taylor combination of
/// `g` and its first three derivatives at `t_n` that the RK4 stage values
/// themselves approximate, which keeps the full temporal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataTiming {
    StageTime,
    #[default]
    StageConsistent,
}

impl std::str::FromStr for DataTiming {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stage-time" => Ok(Self::StageTime),
            "stage-consistent" => Ok(Self::StageConsistent),
            other => Err(Error::Config(format!("unknown data timing '{other}'"))),
        }
    }
}

impl std::fmt::Display for DataTiming {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::StageTime => "stage-time",
            Self::StageConsistent => "stage-consistent",
        })
    }
}

/// One RK4 stage: step start `t0`, step length `dt`, stage `index` in 0..4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub t0: f64,
    pub dt: f64,
    pub index: usize,
}

impl Stage {
    pub const NODES: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

    pub fn time(&self) -> f64 {
        self.t0 + Self::NODES[self.index] * self.dt
    }

    /// Weights of the time derivatives `g^(m)(t0)`, m = 0..3, that reproduce
    /// the stage value of a linear ODE driven by `g`.
    pub fn data_weights(&self) -> [f64; 4] {
        let k = self.dt;
        match self.index {
            0 => [1.0, 0.0, 0.0, 0.0],
            1 => [1.0, 0.5 * k, 0.0, 0.0],
            2 => [1.0, 0.5 * k, 0.25 * k * k, 0.0],
            _ => [1.0, k, 0.5 * k * k, 0.25 * k * k * k],
        }
    }

    /// Data factor for this stage, given `f(t, m)`, the `m`-th time
    /// derivative of the time factor.
    pub fn data_factor(&self, timing: DataTiming, f: impl Fn(f64, u32) -> f64) -> f64 {
        match timing {
            DataTiming::StageTime => f(self.time(), 0),
            DataTiming::StageConsistent => {
                self.data_weights().iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(m, w)| w * f(self.t0, m as u32)).sum()
            }
        }
    }
}

/// Integrates `u_tt = accel(stage, u)` from `t = 0` to `tf`. `accel` writes
/// into its last argument. The last step is shortened to land on `tf`.
pub fn rk4_second_order<F>(u0: Vec<f64>, v0: Vec<f64>, tf: f64, dt: f64, mut accel: F) -> Result<Rk4Output>
where
    F: FnMut(Stage, &[f64], &mut [f64]) -> Result<()>,
{
    let len = u0.len();
    if v0.len() != len {
        return Err(Error::DimensionMismatch { expected: len, actual: v0.len() });
    }
    let (steps, last) = step_plan(tf, dt);
    let (mut u, mut v) = (u0, v0);
    let mut us = vec![0.0; len];
    let mut vs = vec![0.0; len];
    let mut du = vec![0.0; len];
    let mut dv = vec![0.0; len];
    let mut acc = vec![0.0; len];

    for step in 0..steps {
        let t = step as f64 * dt;
        let k = if step + 1 == steps { last } else { dt };
        let stage = |index| Stage { t0: t, dt: k, index };

        accel(stage(0), &u, &mut acc)?;
        du.copy_from_slice(&v);
        dv.copy_from_slice(&acc);
        for i in 0..len {
            us[i] = u[i] + 0.5 * k * v[i];
            vs[i] = v[i] + 0.5 * k * acc[i];
        }

        accel(stage(1), &us, &mut acc)?;
        for i in 0..len {
            du[i] += 2.0 * vs[i];
            dv[i] += 2.0 * acc[i];
            let vi = vs[i];
            us[i] = u[i] + 0.5 * k * vi;
            vs[i] = v[i] + 0.5 * k * acc[i];
        }

        accel(stage(2), &us, &mut acc)?;
        for i in 0..len {
            du[i] += 2.0 * vs[i];
            dv[i] += 2.0 * acc[i];
            let vi = vs[i];
            us[i] = u[i] + k * vi;
            vs[i] = v[i] + k * acc[i];
        }

        accel(stage(3), &us, &mut acc)?;
        for i in 0..len {
            du[i] += vs[i];
            dv[i] += acc[i];
            u[i] += k / 6.0 * du[i];
            v[i] += k / 6.0 * dv[i];
        }

        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::Unstable { step: step + 1, time: t + k });
        }
    }
    Ok(Rk4Output { u, v, steps })
}

/// Time-dependent data and forcing for a 2D run.
pub struct Drive2D<'a> {
    pub solution: Option<&'a ManufacturedSolution>,
    pub corner: Option<&'a CornerPerturbation>,
    pub timing: DataTiming,
}

impl Drive2D<'_> {
    pub fn homogeneous() -> Self {
        Drive2D { solution: None, corner: None, timing: DataTiming::default() }
    }
}

/// Integrates a 2D semi-discretization with data taken from `drive`.
pub fn rk4_integrate_2d(
    sd: &SemiDiscretization2D,
    drive: &Drive2D<'_>,
    u0: Vec<f64>,
    v0: Vec<f64>,
    tf: f64,
    dt: f64,
    exec: Execution,
) -> Result<Rk4Output> {
    let grid = Grid2D { nx: sd.nx(), ny: sd.ny(), h: sd.h() };
    let (kx, ky) = (sd.x().kind(), sd.y().kind());
    let xs = grid.xs();
    let ys = grid.ys();
    let forced = drive.solution.filter(|ms| !ms.is_source_free());
    let mut forcing = vec![0.0; grid.len()];
    let profile = drive.solution.map(|ms| ms.boundary_profile(kx, ky, &grid));
    rk4_second_order(u0, v0, tf, dt, |stage, u, out| {
        let t = stage.time();
        let data = match (drive.solution, &profile) {
            (Some(ms), Some(p)) => {
                let mut d = p.clone().scaled(stage.data_factor(drive.timing, |t, m| ms.time_factor(t, m)));
                if let Some(c) = drive.corner {
                    c.apply(&mut d.west, grid.h);
                }
                d
            }
            _ => BoundaryData2D::zeros(grid.nx, grid.ny),
        };
        let f = match forced {
            Some(ms) => {
                for (j, &x) in xs.iter().enumerate() {
                    for (i, &y) in ys.iter().enumerate() {
                        forcing[j * grid.ny + i] = ms.forcing(x, y, t);
                    }
                }
                Some(forcing.as_slice())
            }
            None => None,
        };
        sd.rhs_into(u, &data, f, out, exec)
    })
}

pub fn rk4_integrate_1d(
    sd: &SemiDiscretization1D,
    solution: Option<&ManufacturedSolution>,
    u0: Vec<f64>,
    v0: Vec<f64>,
    tf: f64,
    dt: f64,
    timing: DataTiming,
) -> Result<Rk4Output> {
    let xs = sd.operator().grid().points();
    let x1 = *xs.last().unwrap();
    let kind = sd.kind();
    let mut forcing = vec![0.0; xs.len()];
    let profile = solution.map(|ms| ms.boundary_profile_1d(kind, x1));
    rk4_second_order(u0, v0, tf, dt, |stage, u, out| {
        let t = stage.time();
        let (gl, gr) = match (solution, profile) {
            (Some(ms), Some((l, r))) => {
                let f = stage.data_factor(timing, |t, m| ms.time_factor(t, m));
                (l * f, r * f)
            }
            _ => (0.0, 0.0),
        };
        if let Some(ms) = solution {
            for (f, &x) in forcing.iter_mut().zip(&xs) {
                *f = ms.forcing_1d(x, t);
            }
        }
        out.copy_from_slice(&forcing);
        sd.apply_homogeneous(u, out);
        sd.add_data(out, gl, gr);
        Ok(())
    })
}

/// Builds the 2D scheme described by `cfg`.
pub fn build_scheme_2d(cfg: &SimulationConfig) -> Result<SemiDiscretization2D> {
    let h = cfg.h();
    let op = build_sbp_d2(cfg.order, cfg.n, h)?;
    let sx = assemble_1d(&op, cfg.bc_x, cfg.penalty_factor)?;
    let sy = if cfg.bc_y == cfg.bc_x { sx.clone() } else { assemble_1d(&op, cfg.bc_y, cfg.penalty_factor)? };
    assemble_2d(sx, sy)
}

/// Runs one manufactured-solution simulation and measures the final error.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationResult> {
    cfg.validate()?;
    match cfg.dim {
        1 => simulate_1d(cfg),
        _ => simulate_2d(cfg),
    }
}

fn simulate_2d(cfg: &SimulationConfig) -> Result<SimulationResult> {
    let sd = build_scheme_2d(cfg)?;
    let ms = ManufacturedSolution::from_choice(cfg.solution);
    let grid = Grid2D::unit_square(cfg.n);
    let h = grid.h;
    let dt = cfg.cfl * h;
    let u0 = sample_solution(&ms, &grid, 0.0).values;
    let v0 = sample_velocity(&ms, &grid, 0.0).values;
    let drive = Drive2D { solution: Some(&ms), corner: cfg.corner.as_ref(), timing: cfg.timing };
    let out = rk4_integrate_2d(&sd, &drive, u0, v0, cfg.tf, dt, cfg.exec)?;
    let exact = sample_solution(&ms, &grid, cfg.tf).values;
    let l2 = l2_error(&out.u, &exact, h)?;
    Ok(SimulationResult { n: cfg.n, h, dt, steps: out.steps, l2_error: l2, u: out.u, exact })
}

fn simulate_1d(cfg: &SimulationConfig) -> Result<SimulationResult> {
    let h = cfg.h();
    let op = build_sbp_d2(cfg.order, cfg.n, h)?;
    let sd = assemble_1d(&op, cfg.bc_x, cfg.penalty_factor)?;
    let ms = ManufacturedSolution::one_dimensional(ManufacturedSolution::from_choice(cfg.solution).kx);
    let xs = op.grid().points();
    let u0 = xs.iter().map(|&x| ms.u_1d(x, 0.0)).collect();
    let v0 = xs.iter().map(|&x| ms.u_t_1d(x, 0.0)).collect();
    let dt = cfg.cfl * h;
    let out = rk4_integrate_1d(&sd, Some(&ms), u0, v0, cfg.tf, dt, cfg.timing)?;
    let exact: Vec<f64> = xs.iter().map(|&x| ms.u_1d(x, cfg.tf)).collect();
    // In 1D the error uses the 1D weight `h^{1/2}`.
    let l2 = l2_error(&out.u, &exact, h)? / h.sqrt();
    Ok(SimulationResult { n: cfg.n, h, dt, steps: out.steps, l2_error: l2, u: out.u, exact })
}

/// `vᵀ(P⊗P)v − uᵀ(P⊗P)(Q_x⊗I + I⊗Q_y)u/h²`, conserved by the semi-discrete
/// homogeneous problem up to dissipation from the penalties.
pub fn discrete_energy_2d(sd: &SemiDiscretization2D, u: &[f64], v: &[f64]) -> Result<f64> {
    let (px, py) = (sd.x().p(), sd.y().p());
    let lu = sd.rhs(u, &BoundaryData2D::zeros(sd.nx(), sd.ny()), None)?;
    let ny = sd.ny();
    let mut e = 0.0;
    for (k, (&vk, &uk)) in v.iter().zip(u).enumerate() {
        let w = px[k / ny] * py[k % ny];
        e += w * (vk * vk - uk * lu[k]);
    }
    Ok(e * sd.h() * sd.h())
}
