//! Modal DG right-hand sides.
//!
//! The basis is the endpoint-normalized Legendre family `φ_n = L_n` on the
//! reference cell, so the mass matrix is `diag(1/(2n+1))` and `φ_n(±1/2) = (±1)^n`.
//! Coefficient vectors are plain slices in the [`Dg1dLayout`]/[`Dg2dLayout`]
//! order, which lets the time integrators work on them directly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Dg1dLayout, Dg2dLayout, Grid1D, Grid2D};
use crate::poly::{gauss_legendre_rule, legendre, radau_pair, Poly, QuadratureRule, PROJECTION_POINTS};
use crate::poly2::Poly2;
use crate::problems::{NumericalFlux, Problem};
use crate::Boundary;

/// Precomputed modal basis data for degree `K`.
#[derive(Clone, Debug)]
pub struct DgBasis {
    pub k: usize,
    pub phi: Vec<Poly>,
    /// `∫ φ_n² dξ`
    pub mass: Vec<f64>,
    /// `stiffness[m][n] = ∫ φ_m' φ_n dξ`
    pub stiffness: Vec<Vec<f64>>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// `∫ φ_m R_R' dξ` and `∫ φ_m R_L' dξ` (zero vectors for `K = 0`).
    pub lift_right: Vec<f64>,
    pub lift_left: Vec<f64>,
}

impl DgBasis {
    pub fn new(k: usize) -> Self {
        let phi: Vec<Poly> = (0..=k).map(legendre).collect();
        let mass = phi.iter().map(|p| p.inner(p)).collect();
        let stiffness = phi
            .iter()
            .map(|pm| {
                let d = pm.derivative();
                phi.iter().map(|pn| d.inner(pn)).collect()
            })
            .collect();
        let plus = phi.iter().map(|p| p.eval(0.5)).collect();
        let minus = phi.iter().map(|p| p.eval(-0.5)).collect();
        let (lift_right, lift_left) = match radau_pair(k) {
            Ok((r_l, r_r)) => {
                let (dl, dr) = (r_l.derivative(), r_r.derivative());
                (phi.iter().map(|p| p.inner(&dr)).collect(), phi.iter().map(|p| p.inner(&dl)).collect())
            }
            Err(_) => (vec![0.0; k + 1], vec![0.0; k + 1]),
        };
        Self { k, phi, mass, stiffness, plus, minus, lift_right, lift_left }
    }

    /// `Σ c_n φ_n`
    pub fn poly(&self, coeffs: impl IntoIterator<Item = f64>) -> Poly {
        let mut p = Poly::zero(self.k);
        for (c, phi) in coeffs.into_iter().zip(&self.phi) {
            p = p.add_scaled(c, phi);
        }
        p
    }

    /// Tensor polynomial `Σ c[a][b] φ_a(ξ) φ_b(η)` of a 2-d block.
    pub fn poly2(&self, block: &[f64]) -> Poly2 {
        let n = self.k + 1;
        let mut p = Poly2::zero(self.k, self.k);
        for a in 0..n {
            for b in 0..n {
                p = p.add_scaled(block[a * n + b], &Poly2::outer(&self.phi[a], &self.phi[b]));
            }
        }
        p
    }

    /// Coefficients of the L² projection of a polynomial onto `P^K`.
    pub fn project_poly(&self, p: &Poly) -> Vec<f64> {
        self.phi.iter().zip(&self.mass).map(|(phi, m)| phi.inner(p) / m).collect()
    }
}

/// `(v_L, v_R) ∈ P^K` with `∫ v_L p dξ = p(-1/2)` and `∫ v_R p dξ = p(1/2)` for all
/// `p ∈ P^K`, from the monomial Gram system.
pub fn riesz_endpoint_functionals(k: usize) -> Result<(Poly, Poly)> {
    let n = k + 1;
    let gram = nalgebra::DMatrix::from_fn(n, n, |i, j| crate::poly::monomial_integral(i + j));
    let rhs = nalgebra::DVector::from_fn(n, |i, _| 0.5f64.powi(i as i32));
    let c = crate::poly::solve_dense(gram, rhs)
        .map_err(|_| Error::Singular(format!("endpoint functional system for K = {k}")))?;
    let v_r = Poly::new(c.iter().copied().collect());
    Ok((v_r.reflect(), v_r))
}

/// Which algebraically equivalent form of the semi-discrete DG equations to
/// assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Assembly {
    /// Volume term `∫ v' f(q)` and flux differences.
    Weak,
    /// After integration by parts: `∫ v f(q)'` plus flux jumps.
    Strong,
    /// Flux jumps lifted by the derivatives of the Radau polynomials.
    RadauLifted,
}

/// 1-d DG discretization of `∂_t q + ∂_x f(q) = 0` for any catalog problem.
#[derive(Clone, Debug)]
pub struct Dg1d {
    pub grid: Grid1D,
    pub basis: DgBasis,
    pub problem: Problem,
    pub flux: NumericalFlux,
    pub assembly: Assembly,
    /// Volume quadrature for nonlinear fluxes.
    pub rule: QuadratureRule,
    phi_at: Vec<Vec<f64>>,
    dphi_at: Vec<Vec<f64>>,
}

impl Dg1d {
    pub fn new(grid: Grid1D, k: usize, problem: Problem, flux: NumericalFlux, rule: QuadratureRule) -> Result<Self> {
        flux.validate()?;
        if matches!(problem, Problem::Advection2d { .. }) {
            return Err(Error::Unsupported("use the 2-d DG operator for advection2d".into()));
        }
        let basis = DgBasis::new(k);
        let phi_at = basis.phi.iter().map(|p| rule.nodes.iter().map(|&x| p.eval(x)).collect()).collect();
        let dphi_at = basis
            .phi
            .iter()
            .map(|p| {
                let d = p.derivative();
                rule.nodes.iter().map(|&x| d.eval(x)).collect()
            })
            .collect();
        Ok(Self { grid, basis, problem, flux, assembly: Assembly::Weak, rule, phi_at, dphi_at })
    }

    pub fn with_assembly(mut self, assembly: Assembly) -> Self {
        self.assembly = assembly;
        self
    }

    pub fn layout(&self) -> Dg1dLayout {
        Dg1dLayout { k: self.basis.k, m: self.problem.n_components(), n_cells: self.grid.n_cells }
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.layout().len() {
            return Err(Error::Mismatch(format!(
                "DG state has {} entries, K = {} layout expects {}",
                u.len(),
                self.basis.k,
                self.layout().len()
            )));
        }
        Ok(())
    }

    /// `(q_i^-, q_i^+)`, one entry per component.
    pub fn traces(&self, u: &[f64], cell: usize) -> (Vec<f64>, Vec<f64>) {
        let l = self.layout();
        let mut minus = vec![0.0; l.m];
        let mut plus = vec![0.0; l.m];
        for n in 0..=l.k {
            for c in 0..l.m {
                let v = u[l.index(cell, n, c)];
                minus[c] += self.basis.minus[n] * v;
                plus[c] += self.basis.plus[n] * v;
            }
        }
        (minus, plus)
    }

    /// Polynomial of one component in one cell.
    pub fn cell_poly(&self, u: &[f64], cell: usize, c: usize) -> Poly {
        let l = self.layout();
        self.basis.poly((0..=l.k).map(|n| u[l.index(cell, n, c)]))
    }

    /// States left and right of interface `p`; ghosts from the boundary data.
    pub fn interface_states(&self, t: f64, u: &[f64], p: usize, boundary: Boundary) -> Result<(Vec<f64>, Vec<f64>)> {
        let ghost = |x: f64| -> Result<Vec<f64>> {
            match boundary {
                Boundary::Dirichlet(data) if self.problem.is_scalar() => Ok(vec![data.value(t, x, 0.0)]),
                Boundary::Dirichlet(_) => Err(Error::Unsupported("Dirichlet data for systems".into())),
                Boundary::Periodic => Err(Error::Mismatch("non-periodic grid without boundary data".into())),
            }
        };
        let left = match self.grid.left_cell(p) {
            Some(i) => self.traces(u, i).1,
            None => ghost(self.grid.interface_x(p))?,
        };
        let right = match self.grid.right_cell(p) {
            Some(i) => self.traces(u, i).0,
            None => ghost(self.grid.interface_x(p))?,
        };
        Ok((left, right))
    }

    /// `f̂` at every interface, `m` entries each.
    pub fn interface_fluxes(&self, t: f64, u: &[f64], boundary: Boundary) -> Result<Vec<f64>> {
        let m = self.problem.n_components();
        let ni = self.grid.n_interfaces();
        let mut out = vec![0.0; ni * m];
        for p in 0..ni {
            let (l, r) = self.interface_states(t, u, p, boundary)?;
            self.flux.value(&self.problem, &l, &r, &mut out[p * m..(p + 1) * m]);
        }
        Ok(out)
    }

    /// Semi-discrete right-hand side `du = L(u)`.
    pub fn rhs(&self, t: f64, u: &[f64], du: &mut [f64], boundary: Boundary) -> Result<()> {
        self.check(u)?;
        let l = self.layout();
        let (k, m) = (l.k, l.m);
        let fhat = self.interface_fluxes(t, u, boundary)?;
        let b = &self.basis;
        let mut fq = vec![0.0; m];
        let mut coeffs = vec![0.0; m];
        // f applied to each modal coefficient (linear problems only)
        let mut fc = vec![0.0; (k + 1) * m];
        for i in 0..l.n_cells {
            let pl = self.grid.left_interface(i);
            let pr = self.grid.right_interface(i);
            let fl = &fhat[pl * m..(pl + 1) * m];
            let fr = &fhat[pr * m..(pr + 1) * m];
            let (qm, qp) = self.traces(u, i);
            let mut f_minus = vec![0.0; m];
            let mut f_plus = vec![0.0; m];
            self.problem.flux(&qm, &mut f_minus);
            self.problem.flux(&qp, &mut f_plus);
            if self.problem.is_linear() {
                for n in 0..=k {
                    for c in 0..m {
                        coeffs[c] = u[l.index(i, n, c)];
                    }
                    self.problem.flux(&coeffs, &mut fq);
                    fc[n * m..(n + 1) * m].copy_from_slice(&fq);
                }
            }
            for row in 0..=k {
                for c in 0..m {
                    let volume = match (self.assembly, self.problem.is_linear()) {
                        (Assembly::Weak, true) => (0..=k).map(|n| b.stiffness[row][n] * fc[n * m + c]).sum(),
                        (_, true) => (0..=k).map(|n| b.stiffness[n][row] * fc[n * m + c]).sum(),
                        (Assembly::Weak, false) => self.weak_volume_quadrature(u, i, row),
                        (_, false) => self.strong_volume_quadrature(u, i, row),
                    };
                    let value = match self.assembly {
                        Assembly::Weak => volume - (b.plus[row] * fr[c] - b.minus[row] * fl[c]),
                        Assembly::Strong => {
                            -volume - b.plus[row] * (fr[c] - f_plus[c]) + b.minus[row] * (fl[c] - f_minus[c])
                        }
                        Assembly::RadauLifted => {
                            -volume - (fr[c] - f_plus[c]) * b.lift_right[row] - (fl[c] - f_minus[c]) * b.lift_left[row]
                        }
                    };
                    du[l.index(i, row, c)] = value / (b.mass[row] * self.grid.dx);
                }
            }
        }
        Ok(())
    }

    fn weak_volume_quadrature(&self, u: &[f64], i: usize, row: usize) -> f64 {
        let l = self.layout();
        let mut s = 0.0;
        for (r, &w) in self.rule.weights.iter().enumerate() {
            let q: f64 = (0..=l.k).map(|n| u[l.index(i, n, 0)] * self.phi_at[n][r]).sum();
            s += w * self.dphi_at[row][r] * self.problem.f(q);
        }
        s
    }

    fn strong_volume_quadrature(&self, u: &[f64], i: usize, row: usize) -> f64 {
        let l = self.layout();
        let mut s = 0.0;
        for (r, &w) in self.rule.weights.iter().enumerate() {
            let q: f64 = (0..=l.k).map(|n| u[l.index(i, n, 0)] * self.phi_at[n][r]).sum();
            let dq: f64 = (0..=l.k).map(|n| u[l.index(i, n, 0)] * self.dphi_at[n][r]).sum();
            s += w * self.phi_at[row][r] * self.problem.df(q) * dq;
        }
        s
    }

    /// `∫ v q̇ dξ = (1/Δx)[∫ v_ξ f(q) dξ − (v⁺ f̂₊ − v⁻ f̂₋)]` for a test function
    /// `v ∈ P^K`, assembled directly from the cell polynomial (one value per
    /// component). With `v = v_R` this is `d/dt q_i⁺`.
    pub fn test_functional(&self, t: f64, u: &[f64], cell: usize, v: &Poly, boundary: Boundary) -> Result<Vec<f64>> {
        self.check(u)?;
        let m = self.problem.n_components();
        let pl = self.grid.left_interface(cell);
        let pr = self.grid.right_interface(cell);
        let mut fl = vec![0.0; m];
        let mut fr = vec![0.0; m];
        let (a, b) = self.interface_states(t, u, pl, boundary)?;
        self.flux.value(&self.problem, &a, &b, &mut fl);
        let (a, b) = self.interface_states(t, u, pr, boundary)?;
        self.flux.value(&self.problem, &a, &b, &mut fr);
        let dv = v.derivative();
        let polys: Vec<Poly> = (0..m).map(|c| self.cell_poly(u, cell, c)).collect();
        let mut out = vec![0.0; m];
        if self.problem.is_linear() {
            // f(q) = J q with constant J
            let j = self.problem.jacobian(&vec![0.0; m]);
            for c in 0..m {
                let vol: f64 = (0..m).map(|d| j.get(c, d) * dv.inner(&polys[d])).sum();
                out[c] = vol;
            }
        } else {
            let p = &polys[0];
            out[0] = self.rule.integrate(|x| dv.eval(x) * self.problem.f(p.eval(x)));
        }
        let (vp, vm) = (v.eval(0.5), v.eval(-0.5));
        for c in 0..m {
            out[c] = (out[c] - (vp * fr[c] - vm * fl[c])) / self.grid.dx;
        }
        Ok(out)
    }
}

/// 2-d tensor-product DG for `∂_t q + U^x ∂_x q + U^y ∂_y q = 0` with the
/// weighted fluxes `q̂ = α⁺ q_L + α⁻ q_R` (x) and `β⁺ q_L + β⁻ q_R` (y).
#[derive(Clone, Debug)]
pub struct Dg2d {
    pub grid: Grid2D,
    pub basis: DgBasis,
    pub ux: f64,
    pub uy: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub parallel: bool,
    ghost_rule: QuadratureRule,
}

/// Flux weights equivalent to a numerical flux for scalar advection with speed `u`.
/// `U = 0` yields zero weights: that direction then contributes nothing.
pub fn advection_weights(flux: &NumericalFlux, u: f64) -> Result<(f64, f64)> {
    if u == 0.0 {
        return Ok((0.0, 0.0));
    }
    flux.validate()?;
    flux.alpha_pair(&Problem::Advection1d { u })
        .ok_or_else(|| Error::Unsupported(format!("flux {} for 2-d advection", flux.name())))
}

impl Dg2d {
    pub fn new(grid: Grid2D, k: usize, ux: f64, uy: f64, alpha: (f64, f64), beta: (f64, f64)) -> Result<Self> {
        for (name, (p, m), u) in [("alpha", alpha, ux), ("beta", beta, uy)] {
            if u != 0.0 && (p + m - 1.0).abs() > 1e-14 {
                return Err(Error::Config(format!("{name} weights {p} + {m} must sum to 1")));
            }
        }
        Ok(Self {
            grid,
            basis: DgBasis::new(k),
            ux,
            uy,
            alpha,
            beta,
            parallel: false,
            ghost_rule: gauss_legendre_rule(PROJECTION_POINTS),
        })
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn layout(&self) -> Dg2dLayout {
        Dg2dLayout { k: self.basis.k, nx: self.grid.x.n_cells, ny: self.grid.y.n_cells }
    }

    /// Along-edge projection of the boundary data on a face.
    fn ghost_coeffs(&self, boundary: Boundary, t: f64, x_face: Option<f64>, y_face: Option<f64>, center: f64, h: f64) -> Result<Vec<f64>> {
        let data = match boundary {
            Boundary::Dirichlet(d) => d,
            Boundary::Periodic => return Err(Error::Mismatch("non-periodic grid without boundary data".into())),
        };
        let r = &self.ghost_rule;
        Ok(self
            .basis
            .phi
            .iter()
            .zip(&self.basis.mass)
            .map(|(phi, mass)| {
                r.integrate(|s| {
                    let along = center + h * s;
                    let v = match (x_face, y_face) {
                        (Some(x), _) => data.value(t, x, along),
                        (_, Some(y)) => data.value(t, along, y),
                        _ => unreachable!(),
                    };
                    phi.eval(s) * v
                }) / mass
            })
            .collect())
    }

    /// Modal coefficients (in `y`) of `q̂` on every x-normal face, `[p][j][b]`.
    pub fn xface_fluxes(&self, t: f64, u: &[f64], boundary: Boundary) -> Result<Vec<f64>> {
        let l = self.layout();
        let n = l.k + 1;
        let nix = self.grid.x.n_interfaces();
        let mut out = vec![0.0; nix * l.ny * n];
        if self.ux == 0.0 {
            return Ok(out);
        }
        let (ap, am) = self.alpha;
        for j in 0..l.ny {
            for p in 0..nix {
                let left: Vec<f64> = match self.grid.x.left_cell(p) {
                    Some(i) => (0..n).map(|b| (0..n).map(|a| self.basis.plus[a] * u[l.index(i, j, a, b)]).sum()).collect(),
                    None => self.ghost_coeffs(boundary, t, Some(self.grid.x.interface_x(p)), None, self.grid.y.cell_center(j), self.grid.y.dx)?,
                };
                let right: Vec<f64> = match self.grid.x.right_cell(p) {
                    Some(i) => (0..n).map(|b| (0..n).map(|a| self.basis.minus[a] * u[l.index(i, j, a, b)]).sum()).collect(),
                    None => self.ghost_coeffs(boundary, t, Some(self.grid.x.interface_x(p)), None, self.grid.y.cell_center(j), self.grid.y.dx)?,
                };
                let o = (p * l.ny + j) * n;
                for b in 0..n {
                    out[o + b] = ap * left[b] + am * right[b];
                }
            }
        }
        Ok(out)
    }

    /// Modal coefficients (in `x`) of `q̂` on every y-normal face, `[q][i][a]`.
    pub fn yface_fluxes(&self, t: f64, u: &[f64], boundary: Boundary) -> Result<Vec<f64>> {
        let l = self.layout();
        let n = l.k + 1;
        let niy = self.grid.y.n_interfaces();
        let mut out = vec![0.0; niy * l.nx * n];
        if self.uy == 0.0 {
            return Ok(out);
        }
        let (bp, bm) = self.beta;
        for q in 0..niy {
            for i in 0..l.nx {
                let below: Vec<f64> = match self.grid.y.left_cell(q) {
                    Some(j) => (0..n).map(|a| (0..n).map(|b| self.basis.plus[b] * u[l.index(i, j, a, b)]).sum()).collect(),
                    None => self.ghost_coeffs(boundary, t, None, Some(self.grid.y.interface_x(q)), self.grid.x.cell_center(i), self.grid.x.dx)?,
                };
                let above: Vec<f64> = match self.grid.y.right_cell(q) {
                    Some(j) => (0..n).map(|a| (0..n).map(|b| self.basis.minus[b] * u[l.index(i, j, a, b)]).sum()).collect(),
                    None => self.ghost_coeffs(boundary, t, None, Some(self.grid.y.interface_x(q)), self.grid.x.cell_center(i), self.grid.x.dx)?,
                };
                let o = (q * l.nx + i) * n;
                for a in 0..n {
                    out[o + a] = bp * below[a] + bm * above[a];
                }
            }
        }
        Ok(out)
    }

    pub fn rhs(&self, t: f64, u: &[f64], du: &mut [f64], boundary: Boundary) -> Result<()> {
        let l = self.layout();
        if u.len() != l.len() || du.len() != l.len() {
            return Err(Error::Mismatch(format!("2-d DG state length {} vs layout {}", u.len(), l.len())));
        }
        let hx = self.xface_fluxes(t, u, boundary)?;
        let hy = self.yface_fluxes(t, u, boundary)?;
        let n = l.k + 1;
        let row_len = l.nx * l.block();
        let row = |j: usize, out: &mut [f64]| {
            for i in 0..l.nx {
                let pl = self.grid.x.left_interface(i);
                let pr = self.grid.x.right_interface(i);
                let qb = self.grid.y.left_interface(j);
                let qt = self.grid.y.right_interface(j);
                let xl = &hx[(pl * l.ny + j) * n..][..n];
                let xr = &hx[(pr * l.ny + j) * n..][..n];
                let yb = &hy[(qb * l.nx + i) * n..][..n];
                let yt = &hy[(qt * l.nx + i) * n..][..n];
                let c = &u[l.cell_offset(i, j)..][..l.block()];
                let o = &mut out[i * l.block()..][..l.block()];
                self.cell_update(c, xl, xr, yb, yt, o);
            }
        };
        if self.parallel {
            du.par_chunks_mut(row_len).enumerate().for_each(|(j, out)| row(j, out));
        } else {
            du.chunks_mut(row_len).enumerate().for_each(|(j, out)| row(j, out));
        }
        Ok(())
    }

    #[inline]
    fn cell_update(&self, c: &[f64], xl: &[f64], xr: &[f64], yb: &[f64], yt: &[f64], out: &mut [f64]) {
        let b = &self.basis;
        let n = b.k + 1;
        let sx = self.ux / self.grid.x.dx;
        let sy = self.uy / self.grid.y.dx;
        for a in 0..n {
            for bb in 0..n {
                let mut x_term = 0.0;
                let mut y_term = 0.0;
                if sx != 0.0 {
                    let vol: f64 = (0..n).map(|a2| b.stiffness[a][a2] * c[a2 * n + bb]).sum();
                    x_term = sx * (vol - (b.plus[a] * xr[bb] - b.minus[a] * xl[bb])) / b.mass[a];
                }
                if sy != 0.0 {
                    let vol: f64 = (0..n).map(|b2| b.stiffness[bb][b2] * c[a * n + b2]).sum();
                    y_term = sy * (vol - (b.plus[bb] * yt[a] - b.minus[bb] * yb[a])) / b.mass[bb];
                }
                out[a * n + bb] = x_term + y_term;
            }
        }
    }

    /// Cell polynomial of cell `(i, j)`.
    pub fn cell_poly(&self, u: &[f64], i: usize, j: usize) -> Poly2 {
        let l = self.layout();
        self.basis.poly2(&u[l.cell_offset(i, j)..][..l.block()])
    }

    /// `∫∫ v(ξ) w(η) q̇ dξ dη` for tensor test functions, assembled from the cell
    /// polynomials and their face restrictions (periodic grids only).
    pub fn test_functional(&self, u: &[f64], i: usize, j: usize, v: &Poly, w: &Poly) -> Result<f64> {
        if !self.grid.x.periodic || !self.grid.y.periodic {
            return Err(Error::Unsupported("test functional on non-periodic grids".into()));
        }
        let (nx, ny) = (self.grid.x.n_cells, self.grid.y.n_cells);
        let q = self.cell_poly(u, i, j);
        let mut total = 0.0;
        if self.ux != 0.0 {
            let (ap, am) = self.alpha;
            let east = self.cell_poly(u, (i + 1) % nx, j);
            let west = self.cell_poly(u, (i + nx - 1) % nx, j);
            let flux_r = q.at_xi(0.5).scale(ap).add_scaled(am, &east.at_xi(-0.5));
            let flux_l = west.at_xi(0.5).scale(ap).add_scaled(am, &q.at_xi(-0.5));
            let vol = q.inner_outer(&v.derivative(), w);
            let face = v.eval(0.5) * w.inner(&flux_r) - v.eval(-0.5) * w.inner(&flux_l);
            total += self.ux / self.grid.x.dx * (vol - face);
        }
        if self.uy != 0.0 {
            let (bp, bm) = self.beta;
            let north = self.cell_poly(u, i, (j + 1) % ny);
            let south = self.cell_poly(u, i, (j + ny - 1) % ny);
            let flux_t = q.at_eta(0.5).scale(bp).add_scaled(bm, &north.at_eta(-0.5));
            let flux_b = south.at_eta(0.5).scale(bp).add_scaled(bm, &q.at_eta(-0.5));
            let vol = q.inner_outer(v, &w.derivative());
            let face = w.eval(0.5) * v.inner(&flux_t) - w.eval(-0.5) * v.inner(&flux_b);
            total += self.uy / self.grid.y.dx * (vol - face);
        }
        Ok(total)
    }
}
