//! Run configurations, exact solutions, error norms, convergence and
//! superconvergence studies, runtime benchmarks and their CSV output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use crate::af::{Af1d, Af2d, PointUpdate};
use crate::dg::{advection_weights, Dg1d, Dg2d};
use crate::equiv::{self, Setting1d, Setting2d};
use crate::error::{Error, Result};
use crate::mesh::{
    dof_counts, method_entry, rule_for_n_int, Af2dVariant, AfState1D, AfState2D, DgState1D, DgState2D, Grid1D, Grid2D, MethodFamily,
};
use crate::poly::{gauss_legendre_rule, radau_points, QuadratureRule, RadauSide, PROJECTION_POINTS};
use crate::serendipity::{EdgeDofs, SerendipityAf2d};
use crate::problems::{lax_friedrichs_constant, NumericalFlux, Problem};
use crate::timeint::{dt_from_cfl, integrate, step_count, RkScheme};
use crate::{Boundary, BoundaryData};

// ---------------------------------------------------------------- config

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Run,
    Convergence,
    Superconvergence,
    EquivCheck,
    Bench,
    DofTable,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "run" => Experiment::Run,
            "convergence" => Experiment::Convergence,
            "superconvergence" => Experiment::Superconvergence,
            "equiv-check" | "equiv_check" => Experiment::EquivCheck,
            "bench" => Experiment::Bench,
            "dof-table" | "dof_table" => Experiment::DofTable,
            other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
        })
    }
}

/// Which 2-d AF variant a method uses; ignored in 1-d.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AfFlavor {
    /// Reduced (serendipity) dofs with edge point values; at order 3 these
    /// are the classical edge midpoints.
    Default,
    Classical,
    Tensorial,
    Serendipity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    Periodic,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialData {
    /// Smooth periodic data built from `sin(2πx)`.
    Sine,
    /// `0.8 + exp(−((x−½)/0.05)² − ((y−½)/0.05)²)` (the y factor only in 2-d).
    Gaussian,
}

/// Numerical flux selector; the Lax–Friedrichs constant may be left to the
/// run, which then takes `1.1 max |f'|` over the initial data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FluxChoice {
    Upwind,
    Central,
    Alpha,
    LaxFriedrichs(Option<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub family: MethodFamily,
    pub flavor: AfFlavor,
    /// Method order `N_order`: `K + 2` for AF, `K + 1` for DG.
    pub order: usize,
    pub rk: RkScheme,
    pub problem: Problem,
    pub initial: Option<InitialData>,
    pub flux: FluxChoice,
    pub alpha_plus: f64,
    pub beta_plus: f64,
    pub grids: Vec<usize>,
    pub t_final: f64,
    pub cfl_override: Option<f64>,
    pub boundary: BoundaryMode,
    pub seed: u64,
    /// 1 runs serially, 0 uses all cores, n > 1 a pool of n threads.
    pub threads: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Run,
            family: MethodFamily::Af,
            flavor: AfFlavor::Default,
            order: 3,
            rk: RkScheme::Ssprk33,
            problem: Problem::Advection1d { u: 1.0 },
            initial: None,
            flux: FluxChoice::Upwind,
            alpha_plus: 1.0,
            beta_plus: 1.0,
            grids: vec![32, 64, 128],
            t_final: 1.0,
            cfl_override: None,
            boundary: BoundaryMode::Periodic,
            seed: 0,
            threads: 1,
            out: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>().map_err(|_| Error::Config(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_problem(v: &str) -> Result<Problem> {
    let (name, args) = match v.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (v, None),
    };
    let nums = |n: usize, default: &[f64]| -> Result<Vec<f64>> {
        match args {
            None => Ok(default.to_vec()),
            Some(a) => {
                let xs = a.split(',').map(|s| parse_f64("problem", s.trim())).collect::<Result<Vec<_>>>()?;
                if xs.len() != n {
                    return Err(Error::Config(format!("problem '{name}' takes {n} parameter(s)")));
                }
                Ok(xs)
            }
        }
    };
    Ok(match name {
        "advection1d" | "advection" => Problem::Advection1d { u: nums(1, &[1.0])?[0] },
        "advection2d" => {
            let v = nums(2, &[1.0, 1.0])?;
            Problem::Advection2d { ux: v[0], uy: v[1] }
        }
        "burgers" => Problem::Burgers,
        "expflux" => Problem::ExpFlux,
        "acoustics" | "acoustics2x2" => Problem::Acoustics { c: nums(1, &[1.0])?[0] },
        other => return Err(Error::Config(format!("unknown problem '{other}'"))),
    })
}

impl RunConfig {
    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = Experiment::parse(v)?,
            "method" => {
                (self.family, self.flavor) = match v.to_ascii_lowercase().as_str() {
                    "af" => (MethodFamily::Af, AfFlavor::Default),
                    "af-classical" => (MethodFamily::Af, AfFlavor::Classical),
                    "af-tensorial" => (MethodFamily::Af, AfFlavor::Tensorial),
                    "af-serendipity" => (MethodFamily::Af, AfFlavor::Serendipity),
                    "dg" => (MethodFamily::Dg, AfFlavor::Default),
                    other => return Err(Error::Config(format!("unknown method '{other}'"))),
                }
            }
            "order" => self.order = parse_usize(key, v)?,
            "k" => {
                let k = parse_usize(key, v)?;
                self.order = match self.family {
                    MethodFamily::Af => k + 2,
                    MethodFamily::Dg => k + 1,
                };
            }
            "rk" => self.rk = RkScheme::parse(v)?,
            "problem" => self.problem = parse_problem(v)?,
            "initial" => {
                self.initial = Some(match v {
                    "sine" => InitialData::Sine,
                    "gaussian" => InitialData::Gaussian,
                    other => return Err(Error::Config(format!("unknown initial data '{other}'"))),
                })
            }
            "flux" => {
                self.flux = match v {
                    "upwind" => FluxChoice::Upwind,
                    "central" => FluxChoice::Central,
                    "alpha" => FluxChoice::Alpha,
                    "lf" | "lax-friedrichs" => FluxChoice::LaxFriedrichs(None),
                    other => match other.strip_prefix("lf:") {
                        Some(a) => FluxChoice::LaxFriedrichs(Some(parse_f64(key, a)?)),
                        None => return Err(Error::Config(format!("unknown flux '{other}'"))),
                    },
                }
            }
            "alpha_plus" => self.alpha_plus = parse_f64(key, v)?,
            "beta_plus" => self.beta_plus = parse_f64(key, v)?,
            "grids" => {
                self.grids = v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_usize(key, s.trim())).collect::<Result<_>>()?
            }
            "t_final" => self.t_final = parse_f64(key, v)?,
            "cfl_override" => {
                self.cfl_override = match v {
                    "" | "none" => None,
                    _ => Some(parse_f64(key, v)?),
                }
            }
            "boundary" => {
                self.boundary = match v {
                    "periodic" => BoundaryMode::Periodic,
                    "dirichlet" => BoundaryMode::Dirichlet,
                    other => return Err(Error::Config(format!("unknown boundary '{other}'"))),
                }
            }
            "seed" => self.seed = v.parse().map_err(|_| Error::Config(format!("seed: '{v}'")))?,
            "threads" => self.threads = parse_usize(key, v)?,
            "out" => self.out = if v.is_empty() || v == "-" { None } else { Some(PathBuf::from(v)) },
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() {
            return Err(Error::Config("grids must not be empty".into()));
        }
        if self.grids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("grid sizes must be strictly increasing".into()));
        }
        if self.grids[0] == 0 {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.family == MethodFamily::Af && self.order < 3 {
            return Err(Error::Config("AF methods have order >= 3".into()));
        }
        if self.family == MethodFamily::Dg && self.order < 1 {
            return Err(Error::Config("DG methods have order >= 1".into()));
        }
        if self.boundary == BoundaryMode::Dirichlet && !self.problem.is_scalar() {
            return Err(Error::Config("Dirichlet boundaries need a scalar problem".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        match self.family {
            MethodFamily::Af => self.order - 2,
            MethodFamily::Dg => self.order - 1,
        }
    }

    pub fn is_2d(&self) -> bool {
        matches!(self.problem, Problem::Advection2d { .. })
    }

    pub fn variant(&self) -> Af2dVariant {
        match (self.flavor, self.order) {
            (AfFlavor::Classical, _) | (AfFlavor::Default, 3) => Af2dVariant::ClassicalMidpoint,
            _ => Af2dVariant::Tensorial,
        }
    }

    /// Whether a 2-d AF run uses the reduced dof set.
    pub fn uses_serendipity(&self) -> bool {
        self.family == MethodFamily::Af
            && self.is_2d()
            && matches!(self.flavor, AfFlavor::Serendipity | AfFlavor::Default)
    }

    /// `AF33`-style label: family, order, order of the time integrator.
    pub fn label(&self) -> String {
        let fam = match self.family {
            MethodFamily::Af => "AF",
            MethodFamily::Dg => "DG",
        };
        let mut s = format!("{fam}{}{}", self.order, self.rk.order());
        if self.family == MethodFamily::Af && self.is_2d() && self.flavor == AfFlavor::Tensorial {
            s.push_str("-tensorial");
        }
        s
    }

    pub fn initial_data(&self) -> InitialData {
        self.initial.unwrap_or(if self.is_2d() { InitialData::Gaussian } else { InitialData::Sine })
    }

    pub fn exact(&self) -> ExactSolution {
        ExactSolution { problem: self.problem, initial: self.initial_data() }
    }

    pub fn numerical_flux(&self) -> Result<NumericalFlux> {
        let f = match self.flux {
            FluxChoice::Upwind => NumericalFlux::Upwind,
            FluxChoice::Central => NumericalFlux::Central,
            FluxChoice::Alpha => NumericalFlux::alpha(self.alpha_plus),
            FluxChoice::LaxFriedrichs(Some(a)) => NumericalFlux::LaxFriedrichs { a },
            FluxChoice::LaxFriedrichs(None) => {
                let exact = self.exact();
                let a = if self.problem.is_linear() {
                    1.1 * self.problem.max_wave_speed(&vec![0.0; self.problem.n_components()])
                } else {
                    lax_friedrichs_constant(&self.problem, (0..=1000).map(|s| exact.q0_1d(s as f64 / 1000.0).0))
                };
                NumericalFlux::LaxFriedrichs { a }
            }
        };
        f.validate()?;
        Ok(f)
    }

    /// `(α⁺, α⁻)` and `(β⁺, β⁻)` for 2-d advection.
    pub fn weights_2d(&self) -> Result<((f64, f64), (f64, f64))> {
        let Problem::Advection2d { ux, uy } = self.problem else {
            return Err(Error::Config("2-d weights need advection2d".into()));
        };
        Ok(match self.flux {
            FluxChoice::Alpha => ((self.alpha_plus, 1.0 - self.alpha_plus), (self.beta_plus, 1.0 - self.beta_plus)),
            _ => {
                let f = self.numerical_flux()?;
                (advection_weights(&f, ux)?, advection_weights(&f, uy)?)
            }
        })
    }

    /// Largest signal speed: `max(|U^x|, |U^y|)`, `c`, or `max |f'(q₀)|` (at
    /// least the Lax–Friedrichs constant).
    pub fn max_speed(&self) -> Result<f64> {
        let s = match self.problem {
            Problem::Advection1d { u } => u.abs(),
            Problem::Advection2d { ux, uy } => ux.abs().max(uy.abs()),
            Problem::Acoustics { c } => c.abs(),
            Problem::Burgers | Problem::ExpFlux => {
                let e = self.exact();
                (0..=1000).map(|s| self.problem.df(e.q0_1d(s as f64 / 1000.0).0).abs()).fold(0.0, f64::max)
            }
        };
        let s = match self.numerical_flux() {
            Ok(NumericalFlux::LaxFriedrichs { a }) if !self.is_2d() => s.max(a),
            _ => s,
        };
        Ok(if s > 0.0 { s } else { 1.0 })
    }

    fn n_int(&self) -> usize {
        method_entry(self.family, self.order).map(|e| e.n_int).unwrap_or(2 * self.order + 1)
    }
}

/// Runs `f` serially, on all cores, or on a pool of `threads` threads.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------- exact solutions

/// Exact solution of the configured problem: translation of the initial data
/// for linear problems, characteristics (before shock formation) otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSolution {
    pub problem: Problem,
    pub initial: InitialData,
}

/// Signed distance to ½ on the unit torus.
fn centered(x: f64) -> f64 {
    x.rem_euclid(1.0) - 0.5
}

const WIDTH: f64 = 0.05;

impl ExactSolution {
    /// Offset and amplitude of `c₀ + c₁ sin(2πx)` for scalar problems.
    fn sine_params(&self) -> (f64, f64) {
        match self.problem {
            Problem::Burgers => (1.0, 0.5),
            Problem::ExpFlux => (0.5, 0.3),
            _ => (0.0, 1.0),
        }
    }

    /// Scalar initial value and derivative (first component for systems).
    pub fn q0_1d(&self, x: f64) -> (f64, f64) {
        match self.initial {
            InitialData::Sine => {
                let (c0, c1) = self.sine_params();
                let w = 2.0 * PI;
                (c0 + c1 * (w * x).sin(), c1 * w * (w * x).cos())
            }
            InitialData::Gaussian => {
                let d = centered(x);
                let g = (-(d / WIDTH).powi(2)).exp();
                (0.8 + g, -2.0 * d / (WIDTH * WIDTH) * g)
            }
        }
    }

    /// Initial value and gradient in 2-d.
    pub fn q0_2d(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self.initial {
            InitialData::Sine => {
                let w = 2.0 * PI;
                let (sx, cx, sy, cy) = ((w * x).sin(), (w * x).cos(), (w * y).sin(), (w * y).cos());
                (sx * sy, w * cx * sy, w * sx * cy)
            }
            InitialData::Gaussian => {
                let (dx, dy) = (centered(x), centered(y));
                let g = (-(dx / WIDTH).powi(2) - (dy / WIDTH).powi(2)).exp();
                let s = -2.0 / (WIDTH * WIDTH) * g;
                (0.8 + g, s * dx, s * dy)
            }
        }
    }

    /// Foot of the characteristic through `(t, x)` for nonlinear scalar problems.
    fn foot(&self, t: f64, x: f64) -> f64 {
        let p = self.problem;
        let mut xi = x - p.df(self.q0_1d(x).0) * t;
        for _ in 0..100 {
            let (q, dq) = self.q0_1d(xi);
            let g = xi + p.df(q) * t - x;
            let dg = 1.0 + p.d2f(q) * dq * t;
            let step = g / dg;
            xi -= step;
            if step.abs() <= 1e-15 * (1.0 + xi.abs()) {
                break;
            }
        }
        xi
    }

    pub fn value_1d(&self, t: f64, x: f64) -> Vec<f64> {
        match self.problem {
            Problem::Advection1d { u } => vec![self.q0_1d(x - u * t).0],
            Problem::Advection2d { ux, .. } => vec![self.q0_1d(x - ux * t).0],
            Problem::Acoustics { c } => {
                // q = w₊(x − ct)(1, 1) + w₋(x + ct)(1, −1)
                let q = |x: f64| -> (f64, f64) {
                    let w = 2.0 * PI * x;
                    (w.sin(), 0.5 * w.cos())
                };
                let (a, b) = q(x - c * t);
                let (d, e) = q(x + c * t);
                let wp = 0.5 * (a + b);
                let wm = 0.5 * (d - e);
                vec![wp + wm, wp - wm]
            }
            Problem::Burgers | Problem::ExpFlux => vec![self.q0_1d(self.foot(t, x)).0],
        }
    }

    pub fn value_2d(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.problem {
            Problem::Advection2d { ux, uy } => self.q0_2d(x - ux * t, y - uy * t).0,
            _ => self.value_1d(t, x)[0],
        }
    }
}

impl BoundaryData for ExactSolution {
    fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        self.value_2d(t, x, y)
    }

    fn time_derivative(&self, t: f64, x: f64, y: f64) -> f64 {
        match self.problem {
            Problem::Advection1d { u } => -u * self.q0_1d(x - u * t).1,
            Problem::Advection2d { ux, uy } => {
                let (_, gx, gy) = self.q0_2d(x - ux * t, y - uy * t);
                -ux * gx - uy * gy
            }
            Problem::Burgers | Problem::ExpFlux => {
                let p = self.problem;
                let xi = self.foot(t, x);
                let (q, dq) = self.q0_1d(xi);
                let qx = dq / (1.0 + p.d2f(q) * dq * t);
                -p.df(q) * qx
            }
            Problem::Acoustics { .. } => f64::NAN,
        }
    }
}

// ---------------------------------------------------------------- discretizations

/// One of the four semi-discrete operators, built from a config on one grid.
#[derive(Clone, Debug)]
pub enum Discretization {
    Af1d(Af1d),
    Dg1d(Dg1d),
    Af2d(Af2d),
    AfSer2d(SerendipityAf2d),
    Dg2d(Dg2d),
}

impl Discretization {
    pub fn build(cfg: &RunConfig, n: usize) -> Result<Self> {
        let periodic = cfg.boundary == BoundaryMode::Periodic;
        let parallel = cfg.threads != 1;
        let k = cfg.k();
        if cfg.is_2d() {
            let Problem::Advection2d { ux, uy } = cfg.problem else { unreachable!() };
            let grid = Grid2D::unit_square(n, periodic);
            let (alpha, beta) = cfg.weights_2d()?;
            return Ok(match cfg.family {
                MethodFamily::Af if cfg.uses_serendipity() => {
                    Discretization::AfSer2d(SerendipityAf2d::new(grid, cfg.order, EdgeDofs::Points, ux, uy, alpha, beta)?.with_parallel(parallel))
                }
                MethodFamily::Af => {
                    Discretization::Af2d(Af2d::new(grid, k, cfg.variant(), ux, uy, alpha, beta)?.with_parallel(parallel))
                }
                MethodFamily::Dg => Discretization::Dg2d(Dg2d::new(grid, k, ux, uy, alpha, beta)?.with_parallel(parallel)),
            });
        }
        let grid = Grid1D::new(0.0, 1.0, n, periodic)?;
        let flux = cfg.numerical_flux()?;
        let rule = rule_for_n_int(cfg.n_int());
        Ok(match cfg.family {
            MethodFamily::Af => {
                let update = run_point_update(&flux, &cfg.problem)?;
                Discretization::Af1d(Af1d::new(grid, k, cfg.problem, update, rule)?)
            }
            MethodFamily::Dg => Discretization::Dg1d(Dg1d::new(grid, k, cfg.problem, flux, rule)?),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Discretization::Af1d(d) => d.layout().len(),
            Discretization::Dg1d(d) => d.layout().len(),
            Discretization::Af2d(d) => d.layout().len(),
            Discretization::AfSer2d(d) => d.layout().len(),
            Discretization::Dg2d(d) => d.layout().len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        match self {
            Discretization::Af1d(d) => d.grid.dx,
            Discretization::Dg1d(d) => d.grid.dx,
            Discretization::Af2d(d) => d.grid.x.dx,
            Discretization::AfSer2d(d) => d.grid.x.dx,
            Discretization::Dg2d(d) => d.grid.x.dx,
        }
    }

    pub fn n_cells(&self) -> usize {
        match self {
            Discretization::Af1d(d) => d.grid.n_cells,
            Discretization::Dg1d(d) => d.grid.n_cells,
            Discretization::Af2d(d) => d.grid.n_cells(),
            Discretization::AfSer2d(d) => d.grid.n_cells(),
            Discretization::Dg2d(d) => d.grid.n_cells(),
        }
    }

    pub fn rhs(&self, t: f64, u: &[f64], du: &mut [f64], boundary: Boundary) -> Result<()> {
        match self {
            Discretization::Af1d(d) => d.rhs(t, u, du, boundary),
            Discretization::Dg1d(d) => d.rhs(t, u, du, boundary),
            Discretization::Af2d(d) => d.rhs(t, u, du, boundary),
            Discretization::AfSer2d(d) => d.rhs(t, u, du, boundary),
            Discretization::Dg2d(d) => d.rhs(t, u, du, boundary),
        }
    }

    /// Dofs of the exact solution at time `t`: point samples and moments for
    /// AF, the L² projection for DG.
    pub fn exact_dofs(&self, exact: &ExactSolution, t: f64) -> Result<Vec<f64>> {
        let rule = gauss_legendre_rule(PROJECTION_POINTS);
        Ok(match self {
            Discretization::Af1d(d) => {
                let m = d.problem.n_components();
                AfState1D::from_fn(&d.grid, d.tables.k(), m, &rule, |x| exact.value_1d(t, x)).data
            }
            Discretization::Dg1d(d) => {
                let m = d.problem.n_components();
                DgState1D::from_fn(&d.grid, d.basis.k, m, &rule, |x| exact.value_1d(t, x)).data
            }
            Discretization::Af2d(d) => AfState2D::from_fn(&d.grid, d.tables.k(), d.variant, &rule, |x, y| exact.value_2d(t, x, y))?.data,
            Discretization::AfSer2d(d) => d.state_from_fn(&rule, |x, y| exact.value_2d(t, x, y)),
            Discretization::Dg2d(d) => DgState2D::from_fn(&d.grid, d.basis.k, &rule, |x, y| exact.value_2d(t, x, y)).data,
        })
    }

    /// Dof families for the error norms, one per kind of dof: AF point
    /// values, edge values and moments, DG moments. Each family pools all
    /// cells and all moment indices.
    pub fn families(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        match self {
            Discretization::Af1d(d) => {
                let l = d.layout();
                for c in 0..l.m {
                    out.push((format!("point_c{c}"), (0..l.n_interfaces).map(|p| l.point(p, c)).collect()));
                    out.push((format!("moment_c{c}"), (0..l.n_cells).flat_map(|i| (0..l.k).map(move |k| l.moment(i, k, c))).collect()));
                }
            }
            Discretization::Dg1d(d) => {
                let l = d.layout();
                for c in 0..l.m {
                    out.push((format!("moment_c{c}"), (0..l.n_cells).flat_map(|i| (0..=l.k).map(move |n| l.index(i, n, c))).collect()));
                }
            }
            Discretization::Af2d(d) => {
                let [nodes, xe, ye, cells] = d.layout().family_ranges();
                out.push(("node".into(), nodes.collect()));
                out.push(("edge".into(), xe.chain(ye).collect()));
                out.push(("moment".into(), cells.collect()));
            }
            Discretization::AfSer2d(d) => {
                let [nodes, xe, ye, cells] = d.layout().family_ranges();
                out.push(("node".into(), nodes.collect()));
                out.push(("edge".into(), xe.chain(ye).collect()));
                out.push(("moment".into(), cells.collect()));
            }
            Discretization::Dg2d(d) => out.push(("moment".into(), (0..d.layout().len()).collect())),
        }
        out
    }
}

/// Point update of a standalone AF run. Linear problems use the variant that
/// matches the DG flux; nonlinear ones use the splittings, since the
/// flux-projection update is not stable on its own beyond upwinding.
pub fn run_point_update(flux: &NumericalFlux, problem: &Problem) -> Result<PointUpdate> {
    if problem.is_linear() {
        return equiv::point_update_for(flux, problem);
    }
    Ok(match *flux {
        NumericalFlux::Upwind => PointUpdate::JacobianSplitting,
        NumericalFlux::LaxFriedrichs { a } => PointUpdate::FluxVectorSplitting { a },
        NumericalFlux::Central => PointUpdate::Central,
        NumericalFlux::AlphaWeighted { plus, minus } => PointUpdate::AlphaWeighted { plus, minus },
    })
}

// ---------------------------------------------------------------- errors

/// Discrete l² (RMS) error of one dof family.
pub fn rms(u: &[f64], exact: &[f64], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    (idx.iter().map(|&i| (u[i] - exact[i]).powi(2)).sum::<f64>() / idx.len() as f64).sqrt()
}

/// Per-family errors and their maximum `E_dofs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub families: Vec<(String, f64)>,
    pub e_dofs: f64,
}

impl ErrorReport {
    pub fn new(families: Vec<(String, f64)>) -> Self {
        let e_dofs = families.iter().map(|f| f.1).fold(0.0, f64::max);
        Self { families, e_dofs }
    }
}

/// `log(e_coarse/e_fine) / log(h_coarse/h_fine)`
pub fn eoc(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------- runs

/// Outcome of one simulation on one grid.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub method: String,
    pub rk: RkScheme,
    /// Cells per axis.
    pub n: usize,
    pub n_cells: usize,
    pub dx: f64,
    pub steps: usize,
    /// Wall-clock time of the time loop in seconds.
    pub tau: f64,
    pub errors: ErrorReport,
    /// Total number of dofs of the discretization.
    pub n_dofs: usize,
    pub state: Vec<f64>,
}

impl RunResult {
    pub fn tau_step(&self) -> f64 {
        self.tau / self.steps.max(1) as f64
    }

    /// `N_dofs · E_dofs · τ`
    pub fn metric(&self) -> f64 {
        self.n_dofs as f64 * self.errors.e_dofs * self.tau
    }
}

/// `Δt = C_CFL Δx / s` with `s` the largest signal speed of the initial data
/// (1 for unit-speed advection, so `Δt = C_CFL Δx` there).
pub fn time_step(cfg: &RunConfig, dx: f64) -> Result<f64> {
    Ok(dt_from_cfl(cfg.family, cfg.order, dx, cfg.cfl_override)? / cfg.max_speed()?)
}

/// Integrates the configured problem on an `n`-cell (per axis) grid and
/// measures the time loop.
pub fn run_simulation(cfg: &RunConfig, n: usize) -> Result<RunResult> {
    let disc = Discretization::build(cfg, n)?;
    let exact = cfg.exact();
    let mut u = disc.exact_dofs(&exact, 0.0)?;
    let boundary = match cfg.boundary {
        BoundaryMode::Periodic => Boundary::Periodic,
        BoundaryMode::Dirichlet => Boundary::Dirichlet(&exact),
    };
    let dx = disc.dx();
    let dt = time_step(cfg, dx)?;
    let start = Instant::now();
    let steps = with_threads(cfg.threads, || {
        integrate(cfg.rk, |t, u: &[f64], du: &mut [f64]| disc.rhs(t, u, du, boundary), &mut u, 0.0, cfg.t_final, dt)
    })??;
    let tau = start.elapsed().as_secs_f64();
    let reference = disc.exact_dofs(&exact, cfg.t_final)?;
    let errors = ErrorReport::new(disc.families().into_iter().map(|(name, idx)| { let e = rms(&u, &reference, &idx); (name, e) }).collect());
    Ok(RunResult {
        method: cfg.label(),
        rk: cfg.rk,
        n,
        n_cells: disc.n_cells(),
        dx,
        steps,
        tau,
        errors,
        n_dofs: disc.len(),
        state: u,
    })
}

/// Per-family errors of one run: `method,n,dx,family,error`, with `E_dofs` last.
pub fn run_csv(r: &RunResult) -> String {
    let mut s = String::from("method,n,dx,family,error\n");
    for (name, e) in &r.errors.families {
        let _ = writeln!(s, "{},{},{:.16e},{},{:.16e}", r.method, r.n, r.dx, name, e);
    }
    let _ = writeln!(s, "{},{},{:.16e},E_dofs,{:.16e}", r.method, r.n, r.dx, r.errors.e_dofs);
    s
}

/// [`run_csv`] rows of several runs under one header.
pub fn runs_csv(results: &[RunResult]) -> String {
    let mut s = String::from("method,n,dx,family,error\n");
    for r in results {
        s.push_str(run_csv(r).split_once('\n').map_or("", |x| x.1));
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub method: String,
    pub n: usize,
    pub dx: f64,
    pub e_dofs: f64,
    pub eoc: Option<f64>,
}

/// Attaches EOCs to consecutive `(n, dx, E_dofs)` triples.
pub fn convergence_rows(method: &str, data: &[(usize, f64, f64)]) -> Vec<ConvergenceRow> {
    data.iter()
        .enumerate()
        .map(|(i, &(n, dx, e))| ConvergenceRow {
            method: method.to_string(),
            n,
            dx,
            e_dofs: e,
            eoc: (i > 0).then(|| eoc(data[i - 1].2, e, data[i - 1].1, dx)),
        })
        .collect()
}

pub fn run_convergence_study(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>> {
    if cfg.grids.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two grids".into()));
    }
    let data = cfg
        .grids
        .iter()
        .map(|&n| run_simulation(cfg, n).map(|r| (n, r.dx, r.errors.e_dofs)))
        .collect::<Result<Vec<_>>>()?;
    Ok(convergence_rows(&cfg.label(), &data))
}

fn fmt_eoc(e: Option<f64>) -> String {
    e.map(|v| format!("{v:.16e}")).unwrap_or_else(|| "-".into())
}

/// `method,dx,e_dofs,eoc`
pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("method,dx,e_dofs,eoc\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.16e},{:.16e},{}", r.method, r.dx, r.e_dofs, fmt_eoc(r.eoc));
    }
    s
}

// ---------------------------------------------------------------- superconvergence

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRow {
    pub k: usize,
    pub n: usize,
    pub dx: f64,
    /// `radau`, `uniform`, `average` (1-d) or `crossing`, `uniform`, `average` (2-d).
    pub point_set: String,
    pub error: f64,
    pub eoc: Option<f64>,
}

const UNIFORM: [f64; 4] = [-0.375, -0.125, 0.125, 0.375];

/// RMS errors of a DG solution at the downwind Radau points (crossing points
/// in 2-d), at uniform points, and of the cell averages.
pub fn probe_errors(disc: &Discretization, u: &[f64], exact: &ExactSolution, t: f64) -> Result<Vec<(String, f64)>> {
    let rule = gauss_legendre_rule(PROJECTION_POINTS);
    let mean = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    match disc {
        Discretization::Dg1d(d) => {
            let Problem::Advection1d { u: speed } = d.problem else {
                return Err(Error::Config("the superconvergence probe runs scalar advection".into()));
            };
            let side = if speed >= 0.0 { RadauSide::Left } else { RadauSide::Right };
            let radau = radau_points(d.basis.k, side)?;
            let (mut er, mut eu, mut ea) = (Vec::new(), Vec::new(), Vec::new());
            for i in 0..d.grid.n_cells {
                let q = d.cell_poly(u, i, 0);
                let xc = d.grid.cell_center(i);
                let at = |xi: f64| q.eval(xi) - exact.value_1d(t, xc + d.grid.dx * xi)[0];
                er.extend(radau.iter().map(|&x| at(x)));
                eu.extend(UNIFORM.iter().map(|&x| at(x)));
                ea.push(q.integral() - rule.integrate(|xi| exact.value_1d(t, xc + d.grid.dx * xi)[0]));
            }
            Ok(vec![("radau".into(), mean(&er)), ("uniform".into(), mean(&eu)), ("average".into(), mean(&ea))])
        }
        Discretization::Dg2d(d) => {
            let sx = if d.ux >= 0.0 { RadauSide::Left } else { RadauSide::Right };
            let sy = if d.uy >= 0.0 { RadauSide::Left } else { RadauSide::Right };
            let (px, py) = (radau_points(d.basis.k, sx)?, radau_points(d.basis.k, sy)?);
            let (mut ec, mut eu, mut ea) = (Vec::new(), Vec::new(), Vec::new());
            let (hx, hy) = (d.grid.x.dx, d.grid.y.dx);
            for j in 0..d.grid.y.n_cells {
                for i in 0..d.grid.x.n_cells {
                    let q = d.cell_poly(u, i, j);
                    let (xc, yc) = (d.grid.x.cell_center(i), d.grid.y.cell_center(j));
                    let at = |a: f64, b: f64| q.eval(a, b) - exact.value_2d(t, xc + hx * a, yc + hy * b);
                    for &a in &px {
                        for &b in &py {
                            ec.push(at(a, b));
                        }
                    }
                    for &a in &UNIFORM {
                        for &b in &UNIFORM {
                            eu.push(at(a, b));
                        }
                    }
                    let avg = rule.integrate(|a| rule.integrate(|b| exact.value_2d(t, xc + hx * a, yc + hy * b)));
                    ea.push(q.integral() - avg);
                }
            }
            Ok(vec![("crossing".into(), mean(&ec)), ("uniform".into(), mean(&eu)), ("average".into(), mean(&ea))])
        }
        _ => Err(Error::Config("the superconvergence probe needs a DG method".into())),
    }
}

pub fn run_superconvergence_probe(cfg: &RunConfig) -> Result<Vec<ProbeRow>> {
    if cfg.family != MethodFamily::Dg {
        return Err(Error::Config("the superconvergence probe needs method = dg".into()));
    }
    let exact = cfg.exact();
    let mut rows: Vec<ProbeRow> = Vec::new();
    for &n in &cfg.grids {
        let r = run_simulation(cfg, n)?;
        let disc = Discretization::build(cfg, n)?;
        for (set, error) in probe_errors(&disc, &r.state, &exact, cfg.t_final)? {
            let prev = rows.iter().rev().find(|p| p.point_set == set);
            let eoc = prev.map(|p| eoc(p.error, error, p.dx, r.dx));
            rows.push(ProbeRow { k: cfg.k(), n, dx: r.dx, point_set: set, error, eoc });
        }
    }
    Ok(rows)
}

/// `k,n,dx,point_set,error,eoc`
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut s = String::from("k,n,dx,point_set,error,eoc\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.16e},{},{:.16e},{}", r.k, r.n, r.dx, r.point_set, r.error, fmt_eoc(r.eoc));
    }
    s
}

pub fn probe_eoc(rows: &[ProbeRow], set: &str) -> Option<f64> {
    rows.iter().rev().find(|r| r.point_set == set).and_then(|r| r.eoc)
}

// ---------------------------------------------------------------- benchmark

/// Timing below this is repeated and averaged.
pub const MIN_TIMED_SECONDS: f64 = 0.05;
/// Fewest timed runs per configuration.
pub const MIN_REPEATS: usize = 3;

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub method: String,
    pub rk: RkScheme,
    pub n: usize,
    pub n_cells: usize,
    pub dx: f64,
    pub steps: usize,
    pub repeats: usize,
    pub tau: f64,
    pub tau_step: f64,
    pub e_dofs: f64,
    pub n_dofs: usize,
    pub metric: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Least-squares slope of `τ` against `N_cells`.
    pub slope: f64,
}

/// Times a run after one discarded warm-up. Runs are repeated (at least
/// [`MIN_REPEATS`] times, and until [`MIN_TIMED_SECONDS`] of work has been
/// measured) and the fastest is kept, which suppresses scheduler noise.
pub fn bench_one(cfg: &RunConfig, n: usize) -> Result<BenchRecord> {
    run_simulation(cfg, n)?;
    let first = run_simulation(cfg, n)?;
    let (mut total, mut tau) = (first.tau, first.tau);
    let mut repeats = 1;
    while (total < MIN_TIMED_SECONDS || repeats < MIN_REPEATS) && repeats < 1000 {
        let t = run_simulation(cfg, n)?.tau;
        total += t;
        tau = tau.min(t);
        repeats += 1;
    }
    Ok(BenchRecord {
        method: first.method.clone(),
        rk: first.rk,
        n,
        n_cells: first.n_cells,
        dx: first.dx,
        steps: first.steps,
        repeats,
        tau,
        tau_step: tau / first.steps.max(1) as f64,
        e_dofs: first.errors.e_dofs,
        n_dofs: first.n_dofs,
        metric: first.n_dofs as f64 * first.errors.e_dofs * tau,
    })
}

/// Benchmarks one method over the configured grids in single-thread mode.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchReport> {
    if cfg.grids.len() < 2 {
        return Err(Error::Config("a benchmark needs at least two grids".into()));
    }
    let mut single = cfg.clone();
    single.threads = 1;
    let records = cfg.grids.iter().map(|&n| bench_one(&single, n)).collect::<Result<Vec<_>>>()?;
    let slope = fit_loglog_slope(
        &records.iter().map(|r| r.n_cells as f64).collect::<Vec<_>>(),
        &records.iter().map(|r| r.tau).collect::<Vec<_>>(),
    );
    Ok(BenchReport { records, slope })
}

pub const BENCH_HEADER: &str = "method,rk,n,n_cells,dx,steps,repeats,tau,tau_step,e_dofs,n_dofs,metric";

/// Bench records plus a `# slope` line per method.
pub fn bench_csv(reports: &[BenchReport]) -> String {
    let mut s = String::new();
    for rep in reports {
        if let Some(r) = rep.records.first() {
            let _ = writeln!(s, "# slope {} {:.16e}", r.method, rep.slope);
        }
    }
    s.push_str(BENCH_HEADER);
    s.push('\n');
    for rep in reports {
        for r in &rep.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
                r.method,
                r.rk.name(),
                r.n,
                r.n_cells,
                r.dx,
                r.steps,
                r.repeats,
                r.tau,
                r.tau_step,
                r.e_dofs,
                r.n_dofs,
                r.metric
            );
        }
    }
    s
}

/// Step count of a CFL-coupled run on an `n × n` grid of the unit square.
pub fn coupled_steps(t_final: f64, cfl: f64, n: usize) -> usize {
    step_count(t_final, cfl / n as f64)
}

// ---------------------------------------------------------------- dof table

/// `family,order,n_int,cfl,n_dofs,n_tdofs,n_mom,n_edge,n_node`; absent
/// entries are written as `-`.
pub fn dof_table_csv() -> Result<String> {
    let mut s = String::from("family,order,n_int,cfl,n_dofs,n_tdofs,n_mom,n_edge,n_node\n");
    for e in crate::mesh::method_catalog() {
        let c = dof_counts(e.family, e.order)?;
        let fam = match e.family {
            MethodFamily::Af => "AF",
            MethodFamily::Dg => "DG",
        };
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{fam},{},{},{:.16e},{},{},{},{},{}",
            e.order,
            e.n_int,
            e.cfl,
            c.n_dofs,
            c.n_tdofs,
            c.n_mom,
            opt(c.n_edge),
            opt(c.n_node)
        );
    }
    Ok(s)
}

// ---------------------------------------------------------------- equivalence

/// Equivalence report of the configured setting: 2-d for `advection2d`, 1-d
/// otherwise, on the first grid.
pub fn run_equiv_check(cfg: &RunConfig) -> Result<equiv::EquivalenceReport> {
    let n = cfg.grids[0];
    if let Problem::Advection2d { ux, uy } = cfg.problem {
        let (alpha, beta) = cfg.weights_2d()?;
        let mut s = Setting2d::new(n, ux, uy, alpha.0, beta.0, cfg.seed);
        s.alpha = alpha;
        s.beta = beta;
        s.k = if cfg.family == MethodFamily::Af { cfg.k() } else { cfg.order - 1 };
        return equiv::verify_equivalence_2d(&s);
    }
    let flux = match cfg.flux {
        FluxChoice::LaxFriedrichs(None) => NumericalFlux::LaxFriedrichs { a: 0.0 },
        _ => cfg.numerical_flux()?,
    };
    equiv::verify_equivalence_1d(&Setting1d::new(cfg.problem, flux, cfg.k(), n, cfg.seed))
}

/// The full sweep behind the equivalence acceptance criteria.
pub fn equivalence_suite(seed: u64) -> Result<Vec<equiv::EquivalenceReport>> {
    let mut out = Vec::new();
    for s in equiv::linear_1d_settings(seed) {
        out.push(equiv::verify_equivalence_1d(&s)?);
    }
    for s in equiv::nonlinear_1d_settings(seed) {
        out.push(equiv::verify_equivalence_1d(&s)?);
        let mut flipped = s.clone();
        flipped.flip_point_sign = true;
        let mut r = equiv::verify_equivalence_1d(&flipped)?;
        for f in &mut r.families {
            f.tolerance = 0.1;
            f.must_differ = true;
        }
        r.families.retain(|f| f.family == "point");
        out.push(r);
    }
    for (ap, bp) in [(1.0, 1.0), (0.8, 0.6)] {
        out.push(equiv::verify_equivalence_2d(&Setting2d::new(16, 1.0, 0.7, ap, bp, seed))?);
    }
    Ok(out)
}

/// CSV text of an experiment and whether its checks passed.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub csv: String,
    pub pass: bool,
}

/// Runs the configured experiment. `suite` replaces a single equivalence
/// check by the full sweep.
pub fn execute(cfg: &RunConfig, suite: bool) -> Result<Outcome> {
    let csv = match cfg.experiment {
        Experiment::Run => runs_csv(&cfg.grids.iter().map(|&n| run_simulation(cfg, n)).collect::<Result<Vec<_>>>()?),
        Experiment::Convergence => convergence_csv(&run_convergence_study(cfg)?),
        Experiment::Superconvergence => probe_csv(&run_superconvergence_probe(cfg)?),
        Experiment::Bench => bench_csv(&[run_benchmark(cfg)?]),
        Experiment::DofTable => dof_table_csv()?,
        Experiment::EquivCheck => {
            let reports = if suite { equivalence_suite(cfg.seed)? } else { vec![run_equiv_check(cfg)?] };
            let mut buf = Vec::new();
            for (i, r) in reports.iter().enumerate() {
                r.write_csv(&mut buf, i == 0)?;
            }
            let pass = reports.iter().all(equiv::EquivalenceReport::pass);
            return Ok(Outcome { csv: String::from_utf8_lossy(&buf).into_owned(), pass });
        }
    };
    Ok(Outcome { csv, pass: true })
}

/// Writes `text` to the configured output, or stdout.
pub fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Quadrature rule of the configured method.
pub fn method_rule(cfg: &RunConfig) -> QuadratureRule {
    rule_for_n_int(cfg.n_int())
}
