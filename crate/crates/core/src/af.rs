//! Semi-discrete Active Flux right-hand sides.
//!
//! 1-d: shared interface point values plus `K` moments per cell, arbitrary `K`,
//! with a selectable point-value update. 2-d: the tensorial variant (nodes,
//! `K` moments per edge, `K²` per cell) and the classical third-order variant
//! that stores edge midpoints instead of edge averages.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{simpson_average, Af1dLayout, Af2dLayout, Af2dVariant, Grid1D, Grid2D};
use crate::poly::{gauss_legendre_rule, moment_dual_basis, AfBasis, Poly, QuadratureRule, PROJECTION_POINTS};
use crate::poly2::Poly2;
use crate::problems::{Mat, NumericalFlux, Problem};
use crate::Boundary;

/// How the interface point values are evolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointUpdate {
    /// `−(J⁺ (DQ_i)⁺ + J⁻ (DQ_{i+1})⁻)` with `J±` at the point value.
    JacobianSplitting,
    /// Lax–Friedrichs-type flux vector splitting `f± = (f ± a q)/2`.
    FluxVectorSplitting { a: f64 },
    /// `−A⁻¹(∂_L f̂ (DF_i)⁺ + ∂_R f̂ (DF_{i+1})⁻)` with the flux projection `F`.
    DgInspired { flux: NumericalFlux },
    /// `−f'(Q)(α⁺ (DQ_i)⁺ + α⁻ (DQ_{i+1})⁻)`
    AlphaWeighted { plus: f64, minus: f64 },
    Central,
}

impl PointUpdate {
    pub fn name(&self) -> String {
        match self {
            PointUpdate::JacobianSplitting => "jacobian_splitting".into(),
            PointUpdate::FluxVectorSplitting { a } => format!("fvs({a})"),
            PointUpdate::DgInspired { flux } => format!("dg_inspired[{}]", flux.name()),
            PointUpdate::AlphaWeighted { plus, minus } => format!("alpha_weighted({plus},{minus})"),
            PointUpdate::Central => "central".into(),
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        match *self {
            PointUpdate::AlphaWeighted { plus, minus } if (plus + minus - 1.0).abs() > 1e-14 => {
                Err(Error::Config(format!("alpha weights {plus} + {minus} must sum to 1")))
            }
            PointUpdate::FluxVectorSplitting { a } if a.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) => {
                Err(Error::Config(format!("splitting constant must be positive, got {a}")))
            }
            PointUpdate::DgInspired { flux } => {
                flux.validate()?;
                if problem.is_scalar() {
                    Ok(())
                } else {
                    Err(Error::Unsupported("the flux-projection point update needs a scalar problem".into()))
                }
            }
            _ => Ok(()),
        }
    }
}

/// Flux data for the flux-projection update that is normally computed from the
/// AF reconstruction but can be supplied from elsewhere (e.g. a DG state).
#[derive(Clone, Debug, Default)]
pub struct FluxData {
    /// `Φ_i^{(k)} = A_k ∫ b_k f(·) dξ`, indexed `i*K + k`.
    pub moments: Vec<f64>,
    /// `(∂_L f̂, ∂_R f̂)` per interface.
    pub partials: Vec<(f64, f64)>,
}

/// Basis tables shared by the 1-d and 2-d operators.
#[derive(Clone, Debug)]
pub struct AfTables {
    pub basis: AfBasis,
    /// `B_j` in dof order `[R_L, S_0, …, S_{K-1}, R_R]`.
    pub ordered: Vec<Poly>,
    /// `B_j'(1/2)` and `B_j'(-1/2)`.
    pub dplus: Vec<f64>,
    pub dminus: Vec<f64>,
    /// `g[k][j] = A_k ∫ b_k B_j' dξ`
    pub g: Vec<Vec<f64>>,
    /// `w[k][j] = A_k ∫ b_k' B_j dξ`
    pub w: Vec<Vec<f64>>,
    /// `b_k(±1/2)`
    pub b_plus: Vec<f64>,
    pub b_minus: Vec<f64>,
}

impl AfTables {
    pub fn new(k: usize) -> Result<Self> {
        let basis = moment_dual_basis(k)?;
        let ordered: Vec<Poly> = basis.ordered().into_iter().cloned().collect();
        let derivs: Vec<Poly> = ordered.iter().map(|p| p.derivative()).collect();
        let dplus = derivs.iter().map(|d| d.eval(0.5)).collect();
        let dminus = derivs.iter().map(|d| d.eval(-0.5)).collect();
        let g = (0..k)
            .map(|kk| derivs.iter().map(|d| basis.a[kk] * basis.b[kk].inner(d)).collect())
            .collect();
        let w = (0..k)
            .map(|kk| {
                let db = basis.b[kk].derivative();
                ordered.iter().map(|p| basis.a[kk] * db.inner(p)).collect()
            })
            .collect();
        let b_plus = basis.b.iter().map(|b| b.eval(0.5)).collect();
        let b_minus = basis.b.iter().map(|b| b.eval(-0.5)).collect();
        Ok(Self { basis, ordered, dplus, dminus, g, w, b_plus, b_minus })
    }

    pub fn k(&self) -> usize {
        self.basis.k
    }
}

/// 1-d Active Flux for `∂_t q + ∂_x f(q) = 0`.
#[derive(Clone, Debug)]
pub struct Af1d {
    pub grid: Grid1D,
    pub tables: AfTables,
    pub problem: Problem,
    pub update: PointUpdate,
    /// Quadrature for nonlinear moment integrals.
    pub rule: QuadratureRule,
}

impl Af1d {
    pub fn new(grid: Grid1D, k: usize, problem: Problem, update: PointUpdate, rule: QuadratureRule) -> Result<Self> {
        update.validate(&problem)?;
        if matches!(problem, Problem::Advection2d { .. }) {
            return Err(Error::Unsupported("use the 2-d AF operator for advection2d".into()));
        }
        Ok(Self { grid, tables: AfTables::new(k)?, problem, update, rule })
    }

    pub fn layout(&self) -> Af1dLayout {
        Af1dLayout::new(&self.grid, self.tables.k(), self.problem.n_components())
    }

    /// `[Q_{i-1/2}, Q_i^{(0)}, …, Q_i^{(K-1)}, Q_{i+1/2}]` for one component.
    pub fn cell_dofs(&self, u: &[f64], i: usize, c: usize) -> Vec<f64> {
        let l = self.layout();
        let mut d = Vec::with_capacity(l.k + 2);
        d.push(u[l.point(self.grid.left_interface(i), c)]);
        d.extend((0..l.k).map(|k| u[l.moment(i, k, c)]));
        d.push(u[l.point(self.grid.right_interface(i), c)]);
        d
    }

    /// Reconstruction `Q_i ∈ P^{K+1}` of one component.
    pub fn reconstruct(&self, u: &[f64], i: usize, c: usize) -> Poly {
        let d = self.cell_dofs(u, i, c);
        let k = self.tables.k();
        self.tables.basis.reconstruct(d[0], &d[1..=k], d[k + 1])
    }

    /// Physical one-sided derivatives `((DQ_i)⁻, (DQ_i)⁺)` per component.
    pub fn one_sided_derivatives(&self, u: &[f64], i: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.problem.n_components();
        let mut minus = vec![0.0; m];
        let mut plus = vec![0.0; m];
        for c in 0..m {
            let d = self.cell_dofs(u, i, c);
            minus[c] = dot(&self.tables.dminus, &d) / self.grid.dx;
            plus[c] = dot(&self.tables.dplus, &d) / self.grid.dx;
        }
        (minus, plus)
    }

    /// `Φ_i^{(k)}` from quadrature of `f ∘ Q_i`.
    pub fn reconstruction_flux_moments(&self) -> impl Fn(&[f64], usize, usize) -> f64 + '_ {
        move |u, i, k| {
            let q = self.reconstruct(u, i, 0);
            let b = &self.tables.basis.b[k];
            self.tables.basis.a[k] * self.rule.integrate(|x| b.eval(x) * self.problem.f(q.eval(x)))
        }
    }

    /// `(DF_i)⁻` and `(DF_i)⁺` of the flux projection with endpoint values
    /// `f(Q_{i∓1/2})` and moments `Φ_i`.
    fn flux_projection_derivatives(&self, u: &[f64], i: usize, phi: &[f64]) -> (f64, f64) {
        let l = self.layout();
        let k = l.k;
        let mut d = Vec::with_capacity(k + 2);
        d.push(self.problem.f(u[l.point(self.grid.left_interface(i), 0)]));
        d.extend_from_slice(phi);
        d.push(self.problem.f(u[l.point(self.grid.right_interface(i), 0)]));
        (dot(&self.tables.dminus, &d) / self.grid.dx, dot(&self.tables.dplus, &d) / self.grid.dx)
    }

    pub fn rhs(&self, t: f64, u: &[f64], du: &mut [f64], boundary: Boundary) -> Result<()> {
        self.rhs_with_flux_data(t, u, du, boundary, None)
    }

    /// Right-hand side; `flux_data` overrides the moments and partials used by
    /// [`PointUpdate::DgInspired`] (ignored by the other variants).
    pub fn rhs_with_flux_data(
        &self,
        t: f64,
        u: &[f64],
        du: &mut [f64],
        boundary: Boundary,
        flux_data: Option<&FluxData>,
    ) -> Result<()> {
        let l = self.layout();
        if u.len() != l.len() || du.len() != l.len() {
            return Err(Error::Mismatch(format!("AF state length {} vs layout {}", u.len(), l.len())));
        }
        let (k, m) = (l.k, l.m);
        let dx = self.grid.dx;
        let linear = self.problem.is_linear();
        let jac = self.problem.jacobian(&vec![0.0; m]);
        let tb = &self.tables;
        let dg_inspired = matches!(self.update, PointUpdate::DgInspired { .. });

        // flux moments Φ for the flux-projection update (scalar only)
        let phi: Vec<f64> = if dg_inspired {
            match flux_data {
                Some(fd) => {
                    if fd.moments.len() != l.n_cells * k || fd.partials.len() != l.n_interfaces {
                        return Err(Error::Mismatch("injected flux data has the wrong shape".into()));
                    }
                    fd.moments.clone()
                }
                None => {
                    let phi_of = self.reconstruction_flux_moments();
                    (0..l.n_cells).flat_map(|i| (0..k).map(move |kk| (i, kk))).map(|(i, kk)| phi_of(u, i, kk)).collect()
                }
            }
        } else {
            Vec::new()
        };

        // moments
        let mut fl = vec![0.0; m];
        let mut fr = vec![0.0; m];
        for i in 0..l.n_cells {
            let pl = self.grid.left_interface(i);
            let pr = self.grid.right_interface(i);
            self.problem.flux(&u[l.point(pl, 0)..l.point(pl, 0) + m], &mut fl);
            self.problem.flux(&u[l.point(pr, 0)..l.point(pr, 0) + m], &mut fr);
            for kk in 0..k {
                for c in 0..m {
                    let volume = if dg_inspired {
                        // A_k ∫ b_k' F = 2 A_k Φ^{(k-1)}
                        if kk == 0 {
                            0.0
                        } else {
                            2.0 * tb.basis.a[kk] * phi[i * k + kk - 1]
                        }
                    } else if linear {
                        let mut s = 0.0;
                        for d in 0..m {
                            let jd = jac.get(c, d);
                            if jd != 0.0 {
                                s += jd * dot(&tb.w[kk], &self.cell_dofs(u, i, d));
                            }
                        }
                        s
                    } else {
                        let q = self.reconstruct(u, i, 0);
                        let db = tb.basis.b[kk].derivative();
                        tb.basis.a[kk] * self.rule.integrate(|x| db.eval(x) * self.problem.f(q.eval(x)))
                    };
                    let surface = tb.basis.a[kk] * (tb.b_plus[kk] * fr[c] - tb.b_minus[kk] * fl[c]);
                    du[l.moment(i, kk, c)] = (volume - surface) / dx;
                }
            }
        }

        // point values
        for p in 0..l.n_interfaces {
            let (left, right) = (self.grid.left_cell(p), self.grid.right_cell(p));
            let (i, j) = match (left, right) {
                (Some(i), Some(j)) => (i, j),
                _ => {
                    let data = match boundary {
                        Boundary::Dirichlet(d) if self.problem.is_scalar() => d,
                        Boundary::Dirichlet(_) => return Err(Error::Unsupported("Dirichlet data for systems".into())),
                        Boundary::Periodic => return Err(Error::Mismatch("non-periodic grid without boundary data".into())),
                    };
                    du[l.point(p, 0)] = data.time_derivative(t, self.grid.interface_x(p), 0.0);
                    continue;
                }
            };
            let q = &u[l.point(p, 0)..l.point(p, 0) + m];
            let out = &mut du[l.point(p, 0)..l.point(p, 0) + m];
            if let PointUpdate::DgInspired { flux } = self.update {
                let a = self.problem.df(q[0]);
                if a.abs() < 1e-12 {
                    return Err(Error::Sonic { interface: p, derivative: a });
                }
                let (dl, dr) = match flux_data {
                    Some(fd) => fd.partials[p],
                    None => {
                        let (pl, pr) = flux.partials(&self.problem, q, q);
                        (pl.a[0], pr.a[0])
                    }
                };
                let (_, df_left_plus) = self.flux_projection_derivatives(u, i, &phi[i * k..(i + 1) * k]);
                let (df_right_minus, _) = self.flux_projection_derivatives(u, j, &phi[j * k..(j + 1) * k]);
                out[0] = -(dl * df_left_plus + dr * df_right_minus) / a;
                continue;
            }
            let (_, dq_left) = self.one_sided_derivatives(u, i);
            let (dq_right, _) = self.one_sided_derivatives(u, j);
            let (wl, wr): (Mat, Mat) = match self.update {
                PointUpdate::JacobianSplitting => self.problem.split(q),
                PointUpdate::FluxVectorSplitting { a } => {
                    let jq = self.problem.jacobian(q);
                    let id = Mat::identity(m);
                    (jq.add_scaled(a, &id).scale(0.5), jq.add_scaled(-a, &id).scale(0.5))
                }
                PointUpdate::AlphaWeighted { plus, minus } => {
                    let jq = self.problem.jacobian(q);
                    (jq.scale(plus), jq.scale(minus))
                }
                PointUpdate::Central => {
                    let jq = self.problem.jacobian(q).scale(0.5);
                    (jq.clone(), jq)
                }
                PointUpdate::DgInspired { .. } => unreachable!(),
            };
            let a = wl.mul_vec(&dq_left);
            let b = wr.mul_vec(&dq_right);
            for c in 0..m {
                out[c] = -(a[c] + b[c]);
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// 2-d Active Flux for `∂_t q + U^x ∂_x q + U^y ∂_y q = 0`.
///
/// Node and edge updates use the weights `(α⁺, α⁻)` for the x-derivative and
/// `(β⁺, β⁻)` for the y-derivative: `α⁺` weighs the cell to the left of the
/// node or edge and `β⁺` the cell below. Pure upwinding for `U > 0` is
/// `(1, 0)`. A zero velocity component contributes nothing.
#[derive(Clone, Debug)]
pub struct Af2d {
    pub grid: Grid2D,
    pub tables: AfTables,
    pub variant: Af2dVariant,
    pub ux: f64,
    pub uy: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub parallel: bool,
    boundary_rule: QuadratureRule,
}

impl Af2d {
    pub fn new(
        grid: Grid2D,
        k: usize,
        variant: Af2dVariant,
        ux: f64,
        uy: f64,
        alpha: (f64, f64),
        beta: (f64, f64),
    ) -> Result<Self> {
        if variant == Af2dVariant::ClassicalMidpoint && k != 1 {
            return Err(Error::Unsupported("classical midpoint AF is third order (K = 1) only".into()));
        }
        for (name, (p, m), u) in [("alpha", alpha, ux), ("beta", beta, uy)] {
            if u != 0.0 && (p + m - 1.0).abs() > 1e-14 {
                return Err(Error::Config(format!("{name} weights {p} + {m} must sum to 1")));
            }
        }
        Ok(Self {
            grid,
            tables: AfTables::new(k)?,
            variant,
            ux,
            uy,
            alpha,
            beta,
            parallel: false,
            boundary_rule: gauss_legendre_rule(PROJECTION_POINTS),
        })
    }

    /// Upwind weights for the sign of each velocity component.
    pub fn upwind_weights(ux: f64, uy: f64) -> ((f64, f64), (f64, f64)) {
        let w = |u: f64| if u >= 0.0 { (1.0, 0.0) } else { (0.0, 1.0) };
        (w(ux), w(uy))
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn layout(&self) -> Af2dLayout {
        Af2dLayout::new(&self.grid, self.tables.k(), self.variant)
    }

    /// Tensor dof array `D[a][b]` of cell `(i, j)` (flattened, `(K+2)²`), in the
    /// order `[left/bottom endpoint, moments…, right/top endpoint]` per axis.
    /// Classical midpoints are converted to edge averages with Simpson's rule.
    pub fn cell_tensor(&self, u: &[f64], i: usize, j: usize) -> Vec<f64> {
        let l = self.layout();
        let k = l.k;
        let n = k + 2;
        let (pl, pr) = (self.grid.x.left_interface(i), self.grid.x.right_interface(i));
        let (qb, qt) = (self.grid.y.left_interface(j), self.grid.y.right_interface(j));
        let mut d = vec![0.0; n * n];
        d[0] = u[l.node(pl, qb)];
        d[(n - 1) * n] = u[l.node(pr, qb)];
        d[n - 1] = u[l.node(pl, qt)];
        d[(n - 1) * n + n - 1] = u[l.node(pr, qt)];
        let classical = self.variant == Af2dVariant::ClassicalMidpoint;
        for m in 0..k {
            let (mut xl, mut xr, mut yb, mut yt) =
                (u[l.xedge(pl, j, m)], u[l.xedge(pr, j, m)], u[l.yedge(i, qb, m)], u[l.yedge(i, qt, m)]);
            if classical {
                xl = simpson_average(d[0], xl, d[n - 1]);
                xr = simpson_average(d[(n - 1) * n], xr, d[(n - 1) * n + n - 1]);
                yb = simpson_average(d[0], yb, d[(n - 1) * n]);
                yt = simpson_average(d[n - 1], yt, d[(n - 1) * n + n - 1]);
            }
            d[1 + m] = xl;
            d[(n - 1) * n + 1 + m] = xr;
            d[(1 + m) * n] = yb;
            d[(1 + m) * n + n - 1] = yt;
        }
        for a in 0..k {
            for b in 0..k {
                d[(1 + a) * n + 1 + b] = u[l.cell(i, j, a, b)];
            }
        }
        d
    }

    /// Tensor-product reconstruction `Σ D[a][b] B_a(ξ) B_b(η)` of cell `(i, j)`.
    pub fn reconstruct(&self, u: &[f64], i: usize, j: usize) -> Poly2 {
        let d = self.cell_tensor(u, i, j);
        let n = self.tables.k() + 2;
        let b = &self.tables.ordered;
        let mut p = Poly2::zero(n - 1, n - 1);
        for a in 0..n {
            for c in 0..n {
                p = p.add_scaled(d[a * n + c], &Poly2::outer(&b[a], &b[c]));
            }
        }
        p
    }

    /// Endpoint data `[Q_left, m_0 … m_{K-1}, Q_right]` of the horizontal edge
    /// of column `i` at `y_q` (all shared dofs; edge averages for the classical variant).
    fn yedge_trace(&self, u: &[f64], i: usize, q: usize) -> Vec<f64> {
        let l = self.layout();
        let k = l.k;
        let (pl, pr) = (self.grid.x.left_interface(i), self.grid.x.right_interface(i));
        let mut t = Vec::with_capacity(k + 2);
        t.push(u[l.node(pl, q)]);
        for m in 0..k {
            let v = u[l.yedge(i, q, m)];
            t.push(if self.variant == Af2dVariant::ClassicalMidpoint {
                simpson_average(u[l.node(pl, q)], v, u[l.node(pr, q)])
            } else {
                v
            });
        }
        t.push(u[l.node(pr, q)]);
        t
    }

    /// Same for the vertical edge at `x_p` spanning row `j`.
    fn xedge_trace(&self, u: &[f64], p: usize, j: usize) -> Vec<f64> {
        let l = self.layout();
        let k = l.k;
        let (qb, qt) = (self.grid.y.left_interface(j), self.grid.y.right_interface(j));
        let mut t = Vec::with_capacity(k + 2);
        t.push(u[l.node(p, qb)]);
        for m in 0..k {
            let v = u[l.xedge(p, j, m)];
            t.push(if self.variant == Af2dVariant::ClassicalMidpoint {
                simpson_average(u[l.node(p, qb)], v, u[l.node(p, qt)])
            } else {
                v
            });
        }
        t.push(u[l.node(p, qt)]);
        t
    }

    fn boundary_data<'b>(&self, boundary: Boundary<'b>) -> Result<&'b dyn crate::BoundaryData> {
        match boundary {
            Boundary::Dirichlet(d) => Ok(d),
            Boundary::Periodic => Err(Error::Mismatch("non-periodic grid without boundary data".into())),
        }
    }

    pub fn rhs(&self, t: f64, u: &[f64], du: &mut [f64], boundary: Boundary) -> Result<()> {
        let l = self.layout();
        if u.len() != l.len() || du.len() != l.len() {
            return Err(Error::Mismatch(format!("2-d AF state length {} vs layout {}", u.len(), l.len())));
        }
        let periodic = self.grid.x.periodic && self.grid.y.periodic;
        let data = if periodic { None } else { Some(self.boundary_data(boundary)?) };
        let [nodes, xedges, yedges, cells] = l.family_ranges();
        let (d_nodes, rest) = du.split_at_mut(nodes.end);
        let (d_x, rest) = rest.split_at_mut(xedges.end - xedges.start);
        let (d_y, d_c) = rest.split_at_mut(yedges.end - yedges.start);
        debug_assert_eq!(d_c.len(), cells.end - cells.start);
        let k = l.k;

        let node_row = |q: usize, out: &mut [f64]| {
            for (p, o) in out.iter_mut().enumerate() {
                *o = self.node_derivative(t, u, p, q, data);
            }
        };
        let xedge_row = |j: usize, out: &mut [f64]| {
            for p in 0..l.nix {
                self.xedge_derivative(t, u, p, j, data, &mut out[p * k..(p + 1) * k]);
            }
        };
        let yedge_row = |q: usize, out: &mut [f64]| {
            for i in 0..l.nx {
                self.yedge_derivative(t, u, i, q, data, &mut out[i * k..(i + 1) * k]);
            }
        };
        let cell_row = |j: usize, out: &mut [f64]| {
            for i in 0..l.nx {
                self.cell_derivative(u, i, j, &mut out[i * k * k..(i + 1) * k * k]);
            }
        };
        if self.parallel {
            rayon::join(
                || {
                    rayon::join(
                        || d_nodes.par_chunks_mut(l.nix).enumerate().for_each(|(q, o)| node_row(q, o)),
                        || d_x.par_chunks_mut(l.nix * k).enumerate().for_each(|(j, o)| xedge_row(j, o)),
                    )
                },
                || {
                    rayon::join(
                        || d_y.par_chunks_mut(l.nx * k).enumerate().for_each(|(q, o)| yedge_row(q, o)),
                        || d_c.par_chunks_mut(l.nx * k * k).enumerate().for_each(|(j, o)| cell_row(j, o)),
                    )
                },
            );
        } else {
            d_nodes.chunks_mut(l.nix).enumerate().for_each(|(q, o)| node_row(q, o));
            d_x.chunks_mut(l.nix * k).enumerate().for_each(|(j, o)| xedge_row(j, o));
            d_y.chunks_mut(l.nx * k).enumerate().for_each(|(q, o)| yedge_row(q, o));
            d_c.chunks_mut(l.nx * k * k).enumerate().for_each(|(j, o)| cell_row(j, o));
        }
        Ok(())
    }

    fn node_derivative(&self, t: f64, u: &[f64], p: usize, q: usize, data: Option<&dyn crate::BoundaryData>) -> f64 {
        let gx = &self.grid.x;
        let gy = &self.grid.y;
        let cells_x = (gx.left_cell(p), gx.right_cell(p));
        let cells_y = (gy.left_cell(q), gy.right_cell(q));
        if let (Some(d), true) = (data, cells_x.0.is_none() || cells_x.1.is_none() || cells_y.0.is_none() || cells_y.1.is_none()) {
            return d.time_derivative(t, gx.interface_x(p), gy.interface_x(q));
        }
        let tb = &self.tables;
        let mut v = 0.0;
        if self.ux != 0.0 {
            let (ap, am) = self.alpha;
            let left = dot(&tb.dplus, &self.yedge_trace(u, cells_x.0.unwrap(), q));
            let right = dot(&tb.dminus, &self.yedge_trace(u, cells_x.1.unwrap(), q));
            v -= self.ux / gx.dx * (ap * left + am * right);
        }
        if self.uy != 0.0 {
            let (bp, bm) = self.beta;
            let below = dot(&tb.dplus, &self.xedge_trace(u, p, cells_y.0.unwrap()));
            let above = dot(&tb.dminus, &self.xedge_trace(u, p, cells_y.1.unwrap()));
            v -= self.uy / gy.dx * (bp * below + bm * above);
        }
        v
    }

    fn xedge_derivative(&self, t: f64, u: &[f64], p: usize, j: usize, data: Option<&dyn crate::BoundaryData>, out: &mut [f64]) {
        let gx = &self.grid.x;
        let gy = &self.grid.y;
        let tb = &self.tables;
        let k = tb.k();
        let n = k + 2;
        let (left, right) = (gx.left_cell(p), gx.right_cell(p));
        if let (Some(d), true) = (data, left.is_none() || right.is_none()) {
            let (x, yc) = (gx.interface_x(p), gy.cell_center(j));
            for (m, o) in out.iter_mut().enumerate() {
                *o = match self.variant {
                    Af2dVariant::Tensorial => {
                        let b = &tb.basis.b[m];
                        tb.basis.a[m] * self.boundary_rule.integrate(|s| b.eval(s) * d.time_derivative(t, x, yc + gy.dx * s))
                    }
                    Af2dVariant::ClassicalMidpoint => d.time_derivative(t, x, yc),
                };
            }
            return;
        }
        let (il, ir) = (left.unwrap(), right.unwrap());
        match self.variant {
            Af2dVariant::Tensorial => {
                let dl = if self.ux != 0.0 { self.cell_tensor(u, il, j) } else { Vec::new() };
                let dr = if self.ux != 0.0 { self.cell_tensor(u, ir, j) } else { Vec::new() };
                let e = self.xedge_trace(u, p, j);
                for (m, o) in out.iter_mut().enumerate() {
                    let mut v = 0.0;
                    if self.ux != 0.0 {
                        let (ap, am) = self.alpha;
                        let sl: f64 = (0..n).map(|a| dl[a * n + 1 + m] * tb.dplus[a]).sum();
                        let sr: f64 = (0..n).map(|a| dr[a * n + 1 + m] * tb.dminus[a]).sum();
                        v -= self.ux / gx.dx * (ap * sl + am * sr);
                    }
                    if self.uy != 0.0 {
                        v -= self.uy / gy.dx * dot(&tb.g[m], &e);
                    }
                    *o = v;
                }
            }
            Af2dVariant::ClassicalMidpoint => {
                // point update at the edge midpoint η = 0
                let mut v = 0.0;
                if self.ux != 0.0 {
                    let (ap, am) = self.alpha;
                    let ql = self.reconstruct(u, il, j).d_xi();
                    let qr = self.reconstruct(u, ir, j).d_xi();
                    v -= self.ux / gx.dx * (ap * ql.eval(0.5, 0.0) + am * qr.eval(-0.5, 0.0));
                }
                if self.uy != 0.0 {
                    let e = self.xedge_trace(u, p, j);
                    let slope: f64 = tb.ordered.iter().zip(&e).map(|(b, c)| c * b.derivative().eval(0.0)).sum();
                    v -= self.uy / gy.dx * slope;
                }
                out[0] = v;
            }
        }
    }

    fn yedge_derivative(&self, t: f64, u: &[f64], i: usize, q: usize, data: Option<&dyn crate::BoundaryData>, out: &mut [f64]) {
        let gx = &self.grid.x;
        let gy = &self.grid.y;
        let tb = &self.tables;
        let k = tb.k();
        let n = k + 2;
        let (below, above) = (gy.left_cell(q), gy.right_cell(q));
        if let (Some(d), true) = (data, below.is_none() || above.is_none()) {
            let (xc, y) = (gx.cell_center(i), gy.interface_x(q));
            for (m, o) in out.iter_mut().enumerate() {
                *o = match self.variant {
                    Af2dVariant::Tensorial => {
                        let b = &tb.basis.b[m];
                        tb.basis.a[m] * self.boundary_rule.integrate(|s| b.eval(s) * d.time_derivative(t, xc + gx.dx * s, y))
                    }
                    Af2dVariant::ClassicalMidpoint => d.time_derivative(t, xc, y),
                };
            }
            return;
        }
        let (jb, ja) = (below.unwrap(), above.unwrap());
        match self.variant {
            Af2dVariant::Tensorial => {
                let db = if self.uy != 0.0 { self.cell_tensor(u, i, jb) } else { Vec::new() };
                let da = if self.uy != 0.0 { self.cell_tensor(u, i, ja) } else { Vec::new() };
                let e = self.yedge_trace(u, i, q);
                for (m, o) in out.iter_mut().enumerate() {
                    let mut v = 0.0;
                    if self.uy != 0.0 {
                        let (bp, bm) = self.beta;
                        let sb: f64 = (0..n).map(|b| db[(1 + m) * n + b] * tb.dplus[b]).sum();
                        let sa: f64 = (0..n).map(|b| da[(1 + m) * n + b] * tb.dminus[b]).sum();
                        v -= self.uy / gy.dx * (bp * sb + bm * sa);
                    }
                    if self.ux != 0.0 {
                        v -= self.ux / gx.dx * dot(&tb.g[m], &e);
                    }
                    *o = v;
                }
            }
            Af2dVariant::ClassicalMidpoint => {
                let mut v = 0.0;
                if self.uy != 0.0 {
                    let (bp, bm) = self.beta;
                    let qb = self.reconstruct(u, i, jb).d_eta();
                    let qa = self.reconstruct(u, i, ja).d_eta();
                    v -= self.uy / gy.dx * (bp * qb.eval(0.0, 0.5) + bm * qa.eval(0.0, -0.5));
                }
                if self.ux != 0.0 {
                    let e = self.yedge_trace(u, i, q);
                    let slope: f64 = tb.ordered.iter().zip(&e).map(|(b, c)| c * b.derivative().eval(0.0)).sum();
                    v -= self.ux / gx.dx * slope;
                }
                out[0] = v;
            }
        }
    }

    fn cell_derivative(&self, u: &[f64], i: usize, j: usize, out: &mut [f64]) {
        let tb = &self.tables;
        let k = tb.k();
        let n = k + 2;
        let d = self.cell_tensor(u, i, j);
        let sx = self.ux / self.grid.x.dx;
        let sy = self.uy / self.grid.y.dx;
        for a in 0..k {
            for b in 0..k {
                let mut v = 0.0;
                if sx != 0.0 {
                    v -= sx * (0..n).map(|c| tb.g[a][c] * d[c * n + 1 + b]).sum::<f64>();
                }
                if sy != 0.0 {
                    v -= sy * (0..n).map(|c| d[(1 + a) * n + c] * tb.g[b][c]).sum::<f64>();
                }
                out[a * k + b] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::AfState2D;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn af(k: usize, problem: Problem, update: PointUpdate, n: usize) -> Af1d {
        Af1d::new(Grid1D::unit_periodic(n), k, problem, update, gauss_legendre_rule(k + 4)).unwrap()
    }

    #[test]
    fn tables_k1() {
        let t = AfTables::new(1).unwrap();
        assert_abs_diff_eq!(t.dplus[0], 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(t.dplus[1], -6.0, epsilon = 1e-13);
        assert_abs_diff_eq!(t.dplus[2], 4.0, epsilon = 1e-13);
        // average of a derivative is the endpoint difference
        for j in 0..3 {
            let b = &t.ordered[j];
            assert_abs_diff_eq!(t.g[0][j], b.eval(0.5) - b.eval(-0.5), epsilon = 1e-13);
            assert_abs_diff_eq!(t.w[0][j], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn k1_upwind_point_update_closed_form() {
        let n = 10;
        let d = af(1, Problem::Advection1d { u: 1.7 }, PointUpdate::JacobianSplitting, n);
        let u = random(d.layout().len(), 3);
        let mut du = vec![0.0; u.len()];
        d.rhs(0.0, &u, &mut du, Boundary::Periodic).unwrap();
        let l = d.layout();
        let dx = 0.1;
        for i in 0..n {
            let p = d.grid.right_interface(i);
            let ql = u[l.point(d.grid.left_interface(i), 0)];
            let qr = u[l.point(p, 0)];
            let avg = u[l.moment(i, 0, 0)];
            assert_abs_diff_eq!(du[l.point(p, 0)], -1.7 / dx * (2.0 * ql - 6.0 * avg + 4.0 * qr), epsilon = 1e-11);
            assert_abs_diff_eq!(du[l.moment(i, 0, 0)], -1.7 * (qr - ql) / dx, epsilon = 1e-11);
        }
    }

    #[test]
    fn constant_state_is_steady_for_every_variant() {
        let variants = [
            PointUpdate::JacobianSplitting,
            PointUpdate::FluxVectorSplitting { a: 3.0 },
            PointUpdate::AlphaWeighted { plus: 0.3, minus: 0.7 },
            PointUpdate::Central,
            PointUpdate::DgInspired { flux: NumericalFlux::LaxFriedrichs { a: 4.0 } },
        ];
        for problem in [Problem::Advection1d { u: -0.6 }, Problem::Burgers, Problem::ExpFlux] {
            for update in variants {
                for k in 1..=3 {
                    let d = af(k, problem, update, 6);
                    let l = d.layout();
                    let mut u = vec![0.0; l.len()];
                    let cm = d.tables.basis.constant_moments();
                    for p in 0..l.n_interfaces {
                        u[l.point(p, 0)] = 1.3;
                    }
                    for i in 0..l.n_cells {
                        for kk in 0..k {
                            u[l.moment(i, kk, 0)] = 1.3 * cm[kk];
                        }
                    }
                    let mut du = vec![1.0; u.len()];
                    d.rhs(0.0, &u, &mut du, Boundary::Periodic).unwrap();
                    assert!(du.iter().all(|v| v.abs() < 1e-11), "{problem:?} {update:?} {k} {du:?}");
                }
            }
        }
    }

    #[test]
    fn conservation_and_linearity() {
        for k in 1..=4 {
            let d = af(k, Problem::Acoustics { c: 1.2 }, PointUpdate::JacobianSplitting, 12);
            let l = d.layout();
            let u1 = random(l.len(), 1 + k as u64);
            let u2 = random(l.len(), 40 + k as u64);
            let (mut d1, mut d2, mut d3) = (vec![0.0; l.len()], vec![0.0; l.len()], vec![0.0; l.len()]);
            d.rhs(0.0, &u1, &mut d1, Boundary::Periodic).unwrap();
            d.rhs(0.0, &u2, &mut d2, Boundary::Periodic).unwrap();
            let combo: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| 0.3 * a + 1.7 * b).collect();
            d.rhs(0.0, &combo, &mut d3, Boundary::Periodic).unwrap();
            let scale = d3.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            for i in 0..l.len() {
                assert!((d3[i] - 0.3 * d1[i] - 1.7 * d2[i]).abs() <= 1e-12 * scale);
            }
            for c in 0..2 {
                let total: f64 = (0..12).map(|i| d1[l.moment(i, 0, c)]).sum();
                assert!(total.abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn point_update_is_exact_for_polynomials() {
        // data sampled from one global cubic: the interface derivative is exact
        let k = 2;
        let n = 5;
        let grid = Grid1D::new(0.0, 1.0, n, false).unwrap();
        let d = Af1d::new(grid.clone(), k, Problem::Advection1d { u: 1.0 }, PointUpdate::JacobianSplitting, gauss_legendre_rule(6)).unwrap();
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.7 * x * x * x;
        let df = |x: f64| 1.0 - 4.0 * x + 2.1 * x * x;
        let s = crate::mesh::AfState1D::from_fn(&grid, k, 1, &gauss_legendre_rule(6), |x| vec![f(x)]);
        for p in 1..n {
            let (_, dq) = d.one_sided_derivatives(&s.data, p - 1);
            assert_abs_diff_eq!(dq[0], df(grid.interface_x(p)), epsilon = 1e-11);
        }
    }

    #[test]
    fn dg_inspired_reduces_to_alpha_weighted_for_linear_flux() {
        for k in 1..=3 {
            let problem = Problem::Advection1d { u: 0.8 };
            let flux = NumericalFlux::LaxFriedrichs { a: 1.5 };
            let (ap, am) = flux.alpha_pair(&problem).unwrap();
            let a = af(k, problem, PointUpdate::DgInspired { flux }, 8);
            let b = af(k, problem, PointUpdate::AlphaWeighted { plus: ap, minus: am }, 8);
            let u = random(a.layout().len(), 11);
            let mut da = vec![0.0; u.len()];
            let mut db = vec![0.0; u.len()];
            a.rhs(0.0, &u, &mut da, Boundary::Periodic).unwrap();
            b.rhs(0.0, &u, &mut db, Boundary::Periodic).unwrap();
            let scale = db.iter().fold(1.0f64, |s, v| s.max(v.abs()));
            for i in 0..u.len() {
                assert!((da[i] - db[i]).abs() <= 1e-12 * scale, "k={k} i={i}");
            }
        }
    }

    #[test]
    fn k1_flux_projection_bracket() {
        // -(DF_i)⁺ Δx = 6 f̄ - 4 f(Q_{i+1/2}) - 2 f(Q_{i-1/2})
        let d = af(1, Problem::Burgers, PointUpdate::DgInspired { flux: NumericalFlux::LaxFriedrichs { a: 3.0 } }, 4);
        let mut u = random(d.layout().len(), 5);
        u.iter_mut().for_each(|v| *v += 2.0);
        let l = d.layout();
        let phi = [0.37];
        let (_, dfp) = d.flux_projection_derivatives(&u, 1, &phi);
        let fl = Problem::Burgers.f(u[l.point(1, 0)]);
        let fr = Problem::Burgers.f(u[l.point(2, 0)]);
        assert_abs_diff_eq!(-dfp * d.grid.dx, 6.0 * 0.37 - 4.0 * fr - 2.0 * fl, epsilon = 1e-12);
    }

    #[test]
    fn sonic_state_is_reported() {
        let d = af(1, Problem::Burgers, PointUpdate::DgInspired { flux: NumericalFlux::LaxFriedrichs { a: 1.0 } }, 4);
        let u = vec![0.0; d.layout().len()];
        let mut du = vec![0.0; u.len()];
        assert!(matches!(d.rhs(0.0, &u, &mut du, Boundary::Periodic), Err(Error::Sonic { .. })));
    }

    fn af2(k: usize, variant: Af2dVariant, n: usize, ux: f64, uy: f64, alpha: (f64, f64), beta: (f64, f64)) -> Af2d {
        Af2d::new(Grid2D::unit_square(n, true), k, variant, ux, uy, alpha, beta).unwrap()
    }

    #[test]
    fn af2d_constant_state_is_steady() {
        for (k, variant) in [(1, Af2dVariant::Tensorial), (2, Af2dVariant::Tensorial), (1, Af2dVariant::ClassicalMidpoint)] {
            let d = af2(k, variant, 5, 0.7, -1.1, (0.6, 0.4), (0.2, 0.8));
            let s = AfState2D::from_fn(&d.grid, k, variant, &gauss_legendre_rule(6), |_, _| 2.5).unwrap();
            let mut du = vec![1.0; s.data.len()];
            d.rhs(0.0, &s.data, &mut du, Boundary::Periodic).unwrap();
            assert!(du.iter().all(|v| v.abs() < 1e-11), "{k} {variant:?}");
        }
        let d = af2(1, Af2dVariant::ClassicalMidpoint, 4, 0.0, 0.0, (1.0, 0.0), (1.0, 0.0));
        let u = random(d.layout().len(), 4);
        let mut du = vec![1.0; u.len()];
        d.rhs(0.0, &u, &mut du, Boundary::Periodic).unwrap();
        assert!(du.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn af2d_reduces_to_1d_rows() {
        // U^y = 0: x-edges and cells of each row follow the 1-d K=1 scheme with
        // edge data in place of point values
        let n = 6;
        for k in 1..=2 {
            let d2 = af2(k, Af2dVariant::Tensorial, n, 1.4, 0.0, (1.0, 0.0), (1.0, 0.0));
            let d1 = af(k, Problem::Advection1d { u: 1.4 }, PointUpdate::JacobianSplitting, n);
            let l = d2.layout();
            let u = random(l.len(), 17);
            let mut du = vec![0.0; u.len()];
            d2.rhs(0.0, &u, &mut du, Boundary::Periodic).unwrap();
            let l1 = d1.layout();
            for j in 0..n {
                for m in 0..k {
                    let mut u1 = vec![0.0; l1.len()];
                    for p in 0..n {
                        u1[l1.point(p, 0)] = u[l.xedge(p, j, m)];
                    }
                    for i in 0..n {
                        for a in 0..k {
                            u1[l1.moment(i, a, 0)] = u[l.cell(i, j, a, m)];
                        }
                    }
                    let mut du1 = vec![0.0; u1.len()];
                    d1.rhs(0.0, &u1, &mut du1, Boundary::Periodic).unwrap();
                    for p in 0..n {
                        assert_abs_diff_eq!(du[l.xedge(p, j, m)], du1[l1.point(p, 0)], epsilon = 1e-10);
                    }
                    for i in 0..n {
                        for a in 0..k {
                            assert_abs_diff_eq!(du[l.cell(i, j, a, m)], du1[l1.moment(i, a, 0)], epsilon = 1e-10);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn af2d_average_update_uses_edge_averages() {
        let n = 4;
        let d = af2(1, Af2dVariant::Tensorial, n, 0.9, -0.4, (1.0, 0.0), (0.0, 1.0));
        let l = d.layout();
        let u = random(l.len(), 3);
        let mut du = vec![0.0; u.len()];
        d.rhs(0.0, &u, &mut du, Boundary::Periodic).unwrap();
        let h = 1.0 / n as f64;
        for j in 0..n {
            for i in 0..n {
                let expected = -0.9 / h * (u[l.xedge((i + 1) % n, j, 0)] - u[l.xedge(i, j, 0)])
                    + 0.4 / h * (u[l.yedge(i, (j + 1) % n, 0)] - u[l.yedge(i, j, 0)]);
                assert_abs_diff_eq!(du[l.cell(i, j, 0, 0)], expected, epsilon = 1e-12);
            }
        }
        let total: f64 = (0..n * n).map(|c| du[l.cell(c % n, c / n, 0, 0)]).sum();
        assert!(total.abs() < 1e-11);
    }

    #[test]
    fn af2d_parallel_matches_serial_and_reconstruction_interpolates() {
        for variant in [Af2dVariant::Tensorial, Af2dVariant::ClassicalMidpoint] {
            let d = af2(1, variant, 5, 1.0, 0.5, (0.8, 0.2), (0.6, 0.4));
            let l = d.layout();
            let u = random(l.len(), 6);
            let mut a = vec![0.0; u.len()];
            let mut b = vec![0.0; u.len()];
            d.rhs(0.0, &u, &mut a, Boundary::Periodic).unwrap();
            d.clone().with_parallel(true).rhs(0.0, &u, &mut b, Boundary::Periodic).unwrap();
            assert_eq!(a, b);
            let q = d.reconstruct(&u, 2, 3);
            assert_abs_diff_eq!(q.eval(-0.5, -0.5), u[l.node(2, 3)], epsilon = 1e-13);
            assert_abs_diff_eq!(q.eval(0.5, 0.5), u[l.node(3, 4)], epsilon = 1e-13);
            if variant == Af2dVariant::ClassicalMidpoint {
                assert_abs_diff_eq!(q.eval(0.5, 0.0), u[l.xedge(3, 3, 0)], epsilon = 1e-13);
            } else {
                assert_abs_diff_eq!(q.at_xi(0.5).integral(), u[l.xedge(3, 3, 0)], epsilon = 1e-13);
            }
            assert_abs_diff_eq!(q.integral(), u[l.cell(2, 3, 0, 0)], epsilon = 1e-13);
        }
    }
}
