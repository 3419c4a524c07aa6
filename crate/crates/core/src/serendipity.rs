//! Reduced-dof 2-d Active Flux for linear advection. Each cell carries its
//! four node values, `N − 2` moments on each edge and `max(1, (N−4)(N−3)/2)`
//! cell moments; the reconstruction lives in the serendipity space of degree
//! `N − 1`, enriched by `ξ²η²` when that space has no interior functions.
//! Node and edge updates differentiate the reconstruction (upwind-weighted
//! across the interface), cell moments use the weak form with edge traces.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{dof_counts, Grid2D, MethodFamily};
use crate::poly::{gauss_legendre_rule, AfBasis, Poly, QuadratureRule, PROJECTION_POINTS};
use crate::poly2::Poly2;
use crate::{Boundary, BoundaryData};

/// Corners in local order: `(−,−)`, `(+,−)`, `(−,+)`, `(+,+)`.
const CORNERS: [(f64, f64); 4] = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)];
/// Edges in local order: left, right, bottom, top.
const LEFT: usize = 0;
const RIGHT: usize = 1;
const BOTTOM: usize = 2;
const TOP: usize = 3;

/// What the `N − 2` dofs on each edge are.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDofs {
    /// Point values at equidistant interior edge points.
    Points,
    /// Moments `A_m ∫ b_m q` along the edge.
    Moments,
}

impl EdgeDofs {
    /// Reference position of edge point `m` of `n`.
    pub fn point(m: usize, n: usize) -> f64 {
        -0.5 + (m + 1) as f64 / (n + 1) as f64
    }

    /// Edge dof `m` of the trace `g`.
    pub fn apply(self, m: usize, n: usize, g: &Poly) -> f64 {
        match self {
            EdgeDofs::Points => g.eval(Self::point(m, n)),
            EdgeDofs::Moments => (m + 1) as f64 * AfBasis::moment_weight(m).inner(g),
        }
    }

    /// Edge dof `m` of a function along the edge, integrated with `rule`.
    pub fn sample(self, m: usize, n: usize, rule: &QuadratureRule, f: impl Fn(f64) -> f64) -> f64 {
        match self {
            EdgeDofs::Points => f(Self::point(m, n)),
            EdgeDofs::Moments => {
                let b = AfBasis::moment_weight(m);
                (m + 1) as f64 * rule.integrate(|s| b.eval(s) * f(s))
            }
        }
    }
}

/// Index arithmetic for the reduced 2-d AF state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SerendipityLayout {
    pub order: usize,
    /// Moments per edge, `N − 2`.
    pub ke: usize,
    pub n_mom: usize,
    pub nx: usize,
    pub ny: usize,
    pub nix: usize,
    pub niy: usize,
}

impl SerendipityLayout {
    pub fn new(grid: &Grid2D, order: usize) -> Result<Self> {
        let c = dof_counts(MethodFamily::Af, order)?;
        Ok(Self {
            order,
            ke: order - 2,
            n_mom: c.n_mom,
            nx: grid.x.n_cells,
            ny: grid.y.n_cells,
            nix: grid.x.n_interfaces(),
            niy: grid.y.n_interfaces(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nix * self.niy
    }

    fn xedge_offset(&self) -> usize {
        self.n_nodes()
    }

    fn yedge_offset(&self) -> usize {
        self.xedge_offset() + self.nix * self.ny * self.ke
    }

    fn cell_offset(&self) -> usize {
        self.yedge_offset() + self.niy * self.nx * self.ke
    }

    pub fn len(&self) -> usize {
        self.cell_offset() + self.nx * self.ny * self.n_mom
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, p: usize, q: usize) -> usize {
        q * self.nix + p
    }

    pub fn xedge(&self, p: usize, j: usize, m: usize) -> usize {
        self.xedge_offset() + (j * self.nix + p) * self.ke + m
    }

    pub fn yedge(&self, i: usize, q: usize, m: usize) -> usize {
        self.yedge_offset() + (q * self.nx + i) * self.ke + m
    }

    pub fn cell(&self, i: usize, j: usize, s: usize) -> usize {
        self.cell_offset() + (j * self.nx + i) * self.n_mom + s
    }

    /// Node, x-edge, y-edge and cell ranges.
    pub fn family_ranges(&self) -> [std::ops::Range<usize>; 4] {
        [0..self.xedge_offset(), self.xedge_offset()..self.yedge_offset(), self.yedge_offset()..self.cell_offset(), self.cell_offset()..self.len()]
    }

    /// `(k, l)` of each cell moment `A_k A_l ∫∫ b_k b_l q`.
    pub fn cell_moments(&self) -> Vec<(usize, usize)> {
        let top = self.order.saturating_sub(5);
        let mut v: Vec<(usize, usize)> = (0..=top).flat_map(|s| (0..=s).map(move |l| (s - l, l))).collect();
        v.truncate(self.n_mom);
        v
    }

    /// Local dof count of one cell.
    pub fn local_len(&self) -> usize {
        4 + 4 * self.ke + self.n_mom
    }
}

/// Monomial exponents spanning the reconstruction space of order `N`.
pub fn reconstruction_exponents(order: usize) -> Vec<(usize, usize)> {
    let r = order - 1;
    let sl = |a: usize| if a >= 2 { a } else { 0 };
    let mut v: Vec<(usize, usize)> = (0..=r).flat_map(|a| (0..=r).map(move |b| (a, b))).filter(|&(a, b)| sl(a) + sl(b) <= r).collect();
    if order <= 4 {
        v.push((2, 2));
    }
    v
}

/// Linear functionals on the reference cell, as rows over the local dofs.
#[derive(Clone, Debug)]
pub struct SerendipityTables {
    pub edge_dofs: EdgeDofs,
    pub n_mom: usize,
    /// Reconstruction basis, one polynomial per local dof.
    pub basis: Vec<Poly2>,
    /// `∂_ξ q`, `∂_η q` at each corner.
    pub corner_dxi: [Vec<f64>; 4],
    pub corner_deta: [Vec<f64>; 4],
    /// Edge dofs of the normal derivative per edge (∂_ξ on x-edges).
    pub edge_normal: [Vec<Vec<f64>>; 4],
    /// Edge dofs of the tangential derivative per edge.
    pub edge_tangential: [Vec<Vec<f64>>; 4],
    /// Weak-form x- and y-flux functionals of each cell moment.
    pub cell_x: Vec<Vec<f64>>,
    pub cell_y: Vec<Vec<f64>>,
}

impl SerendipityTables {
    pub fn new(order: usize, moments: &[(usize, usize)], edge_dofs: EdgeDofs) -> Result<Self> {
        if order < 3 {
            return Err(Error::InvalidOrder(format!("AF order must be >= 3, got {order}")));
        }
        let ke = order - 2;
        let n = 4 + 4 * ke + moments.len();
        let exps = reconstruction_exponents(order);
        if exps.len() != n {
            return Err(Error::Mismatch(format!("order {order}: {} monomials for {n} dofs", exps.len())));
        }
        let b: Vec<Poly> = (0..order).map(AfBasis::moment_weight).collect();
        let a = |k: usize| (k + 1) as f64;
        let monos: Vec<Poly2> = exps.iter().map(|&(i, j)| Poly2::outer(&Poly::monomial(i), &Poly::monomial(j))).collect();

        // local dof functionals
        let dof = |q: &Poly2, d: usize| -> f64 {
            if d < 4 {
                let (x, y) = CORNERS[d];
                return q.eval(x, y);
            }
            let d = d - 4;
            if d < 4 * ke {
                let (e, m) = (d / ke, d % ke);
                let trace = match e {
                    LEFT => q.at_xi(-0.5),
                    RIGHT => q.at_xi(0.5),
                    BOTTOM => q.at_eta(-0.5),
                    _ => q.at_eta(0.5),
                };
                return edge_dofs.apply(m, ke, &trace);
            }
            let (k, l) = moments[d - 4 * ke];
            a(k) * a(l) * q.inner_outer(&b[k], &b[l])
        };
        let mut mat = DMatrix::zeros(n, n);
        for (j, m) in monos.iter().enumerate() {
            for i in 0..n {
                mat[(i, j)] = dof(m, i);
            }
        }
        let inv = mat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("order-{order} reduced AF dofs are not unisolvent")))?;
        let basis: Vec<Poly2> = (0..n)
            .map(|d| monos.iter().enumerate().fold(Poly2::zero(0, 0), |acc, (j, m)| acc.add_scaled(inv[(j, d)], m)))
            .collect();
        // row of a functional G over the local dofs: G(basis_d)
        let row = |g: &dyn Fn(&Poly2) -> f64| -> Vec<f64> { basis.iter().map(g).collect() };

        let corner_dxi = CORNERS.map(|(x, y)| row(&|q| q.d_xi().eval(x, y)));
        let corner_deta = CORNERS.map(|(x, y)| row(&|q| q.d_eta().eval(x, y)));
        let edge_trace = |q: &Poly2, e: usize| match e {
            LEFT => q.at_xi(-0.5),
            RIGHT => q.at_xi(0.5),
            BOTTOM => q.at_eta(-0.5),
            _ => q.at_eta(0.5),
        };
        let edge_rows = |normal: bool| -> [Vec<Vec<f64>>; 4] {
            [LEFT, RIGHT, BOTTOM, TOP].map(|e| {
                (0..ke)
                    .map(|m| {
                        row(&|q| {
                            let d = if (e < 2) == normal { q.d_xi() } else { q.d_eta() };
                            edge_dofs.apply(m, ke, &edge_trace(&d, e))
                        })
                    })
                    .collect()
            })
        };
        let edge_normal = edge_rows(true);
        let edge_tangential = edge_rows(false);
        let cell_x = moments
            .iter()
            .map(|&(k, l)| {
                row(&|q| {
                    let w = a(k) * a(l);
                    let surface = b[k].eval(0.5) * b[l].inner(&q.at_xi(0.5)) - b[k].eval(-0.5) * b[l].inner(&q.at_xi(-0.5));
                    w * (surface - q.inner_outer(&b[k].derivative(), &b[l]))
                })
            })
            .collect();
        let cell_y = moments
            .iter()
            .map(|&(k, l)| {
                row(&|q| {
                    let w = a(k) * a(l);
                    let surface = b[l].eval(0.5) * b[k].inner(&q.at_eta(0.5)) - b[l].eval(-0.5) * b[k].inner(&q.at_eta(-0.5));
                    w * (surface - q.inner_outer(&b[k], &b[l].derivative()))
                })
            })
            .collect();
        Ok(Self { edge_dofs, n_mom: moments.len(), basis, corner_dxi, corner_deta, edge_normal, edge_tangential, cell_x, cell_y })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reduced 2-d AF for `∂_t q + U^x ∂_x q + U^y ∂_y q = 0` with the same
/// weight conventions as [`crate::af::Af2d`].
#[derive(Clone, Debug)]
pub struct SerendipityAf2d {
    pub grid: Grid2D,
    pub order: usize,
    pub tables: SerendipityTables,
    pub ux: f64,
    pub uy: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub parallel: bool,
    boundary_rule: QuadratureRule,
}

impl SerendipityAf2d {
    pub fn new(grid: Grid2D, order: usize, edge_dofs: EdgeDofs, ux: f64, uy: f64, alpha: (f64, f64), beta: (f64, f64)) -> Result<Self> {
        for (name, (p, m), u) in [("alpha", alpha, ux), ("beta", beta, uy)] {
            if u != 0.0 && (p + m - 1.0).abs() > 1e-14 {
                return Err(Error::Config(format!("{name} weights {p} + {m} must sum to 1")));
            }
        }
        let layout = SerendipityLayout::new(&grid, order)?;
        let tables = SerendipityTables::new(order, &layout.cell_moments(), edge_dofs)?;
        Ok(Self { grid, order, tables, ux, uy, alpha, beta, parallel: false, boundary_rule: gauss_legendre_rule(PROJECTION_POINTS) })
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn layout(&self) -> SerendipityLayout {
        SerendipityLayout::new(&self.grid, self.order).expect("order validated at construction")
    }

    /// Local dofs of cell `(i, j)` in table order.
    pub fn cell_dofs(&self, u: &[f64], i: usize, j: usize) -> Vec<f64> {
        let l = self.layout();
        let (pl, pr) = (self.grid.x.left_interface(i), self.grid.x.right_interface(i));
        let (qb, qt) = (self.grid.y.left_interface(j), self.grid.y.right_interface(j));
        let mut d = Vec::with_capacity(l.local_len());
        d.extend([l.node(pl, qb), l.node(pr, qb), l.node(pl, qt), l.node(pr, qt)].map(|x| u[x]));
        for p in [pl, pr] {
            d.extend((0..l.ke).map(|m| u[l.xedge(p, j, m)]));
        }
        for q in [qb, qt] {
            d.extend((0..l.ke).map(|m| u[l.yedge(i, q, m)]));
        }
        d.extend((0..l.n_mom).map(|s| u[l.cell(i, j, s)]));
        d
    }

    pub fn reconstruct(&self, u: &[f64], i: usize, j: usize) -> Poly2 {
        self.cell_dofs(u, i, j).iter().zip(&self.tables.basis).fold(Poly2::zero(0, 0), |acc, (c, b)| acc.add_scaled(*c, b))
    }

    /// Point samples of nodes, edge moments and cell moments of `f` (via `rule`).
    pub fn state_from_fn(&self, rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let l = self.layout();
        let (gx, gy) = (&self.grid.x, &self.grid.y);
        let mut u = vec![0.0; l.len()];
        let line = |m: usize, g: &dyn Fn(f64) -> f64| self.tables.edge_dofs.sample(m, l.ke, rule, g);
        for q in 0..l.niy {
            for p in 0..l.nix {
                u[l.node(p, q)] = f(gx.interface_x(p), gy.interface_x(q));
            }
        }
        for j in 0..l.ny {
            for p in 0..l.nix {
                for m in 0..l.ke {
                    u[l.xedge(p, j, m)] = line(m, &|s| f(gx.interface_x(p), gy.cell_center(j) + gy.dx * s));
                }
            }
        }
        for q in 0..l.niy {
            for i in 0..l.nx {
                for m in 0..l.ke {
                    u[l.yedge(i, q, m)] = line(m, &|s| f(gx.cell_center(i) + gx.dx * s, gy.interface_x(q)));
                }
            }
        }
        let moments = l.cell_moments();
        let bm: Vec<Poly> = (0..=l.order).map(AfBasis::moment_weight).collect();
        for j in 0..l.ny {
            for i in 0..l.nx {
                let (xc, yc) = (gx.cell_center(i), gy.cell_center(j));
                for (s, &(k, kl)) in moments.iter().enumerate() {
                    let w = ((k + 1) * (kl + 1)) as f64;
                    u[l.cell(i, j, s)] = w * rule.integrate(|a| bm[k].eval(a) * rule.integrate(|c| bm[kl].eval(c) * f(xc + gx.dx * a, yc + gy.dx * c)));
                }
            }
        }
        u
    }

    fn data<'b>(&self, boundary: Boundary<'b>) -> Result<Option<&'b dyn BoundaryData>> {
        if self.grid.x.periodic && self.grid.y.periodic {
            return Ok(None);
        }
        match boundary {
            Boundary::Dirichlet(d) => Ok(Some(d)),
            Boundary::Periodic => Err(Error::Mismatch("non-periodic grid without boundary data".into())),
        }
    }

    fn edge_time_derivative(&self, d: &dyn BoundaryData, t: f64, m: usize, point: impl Fn(f64) -> (f64, f64)) -> f64 {
        self.tables.edge_dofs.sample(m, self.order - 2, &self.boundary_rule, |s| {
            let (x, y) = point(s);
            d.time_derivative(t, x, y)
        })
    }

    pub fn rhs(&self, t: f64, u: &[f64], du: &mut [f64], boundary: Boundary) -> Result<()> {
        let l = self.layout();
        if u.len() != l.len() || du.len() != l.len() {
            return Err(Error::Mismatch(format!("reduced AF state length {} vs layout {}", u.len(), l.len())));
        }
        let data = self.data(boundary)?;
        let (gx, gy) = (&self.grid.x, &self.grid.y);
        let (hx, hy) = (gx.dx, gy.dx);
        let tb = &self.tables;
        let [nodes, xe, ye, cells] = l.family_ranges();
        let (d_nodes, rest) = du.split_at_mut(nodes.end);
        let (d_x, rest) = rest.split_at_mut(xe.len());
        let (d_y, d_c) = rest.split_at_mut(ye.len());
        debug_assert_eq!(d_c.len(), cells.len());
        let ll = l.local_len();
        let mut local = vec![0.0; l.nx * l.ny * ll];
        let gather = |j: usize, row: &mut [f64]| {
            for (i, c) in row.chunks_mut(ll).enumerate() {
                c.copy_from_slice(&self.cell_dofs(u, i, j));
            }
        };
        if self.parallel {
            local.par_chunks_mut(l.nx * ll).enumerate().for_each(|(j, row)| gather(j, row));
        } else {
            local.chunks_mut(l.nx * ll).enumerate().for_each(|(j, row)| gather(j, row));
        }
        let dofs = |i: usize, j: usize| &local[(j * l.nx + i) * ll..][..ll];
        let (ap, am) = self.alpha;
        let (bp, bm) = self.beta;

        let node_row = |q: usize, out: &mut [f64]| {
            for (p, o) in out.iter_mut().enumerate() {
                let (cl, cr) = (gx.left_cell(p), gx.right_cell(p));
                let (cb, ca) = (gy.left_cell(q), gy.right_cell(q));
                if let (Some(d), true) = (data, cl.is_none() || cr.is_none() || cb.is_none() || ca.is_none()) {
                    *o = d.time_derivative(t, gx.interface_x(p), gy.interface_x(q));
                    continue;
                }
                let (cl, cr, cb, ca) = (cl.unwrap(), cr.unwrap(), cb.unwrap(), ca.unwrap());
                let mut v = 0.0;
                if self.ux != 0.0 {
                    // the node sits on the top edge of row cb: corners (+,+) of the left cell, (−,+) of the right
                    let left = dot(&tb.corner_dxi[3], dofs(cl, cb));
                    let right = dot(&tb.corner_dxi[2], dofs(cr, cb));
                    v -= self.ux / hx * (ap * left + am * right);
                }
                if self.uy != 0.0 {
                    let below = dot(&tb.corner_deta[3], dofs(cl, cb));
                    let above = dot(&tb.corner_deta[1], dofs(cl, ca));
                    v -= self.uy / hy * (bp * below + bm * above);
                }
                *o = v;
            }
        };
        let xedge_row = |j: usize, out: &mut [f64]| {
            for p in 0..l.nix {
                let o = &mut out[p * l.ke..(p + 1) * l.ke];
                let (cl, cr) = (gx.left_cell(p), gx.right_cell(p));
                if let (Some(d), true) = (data, cl.is_none() || cr.is_none()) {
                    let (x, yc) = (gx.interface_x(p), gy.cell_center(j));
                    for (m, v) in o.iter_mut().enumerate() {
                        *v = self.edge_time_derivative(d, t, m, |s| (x, yc + hy * s));
                    }
                    continue;
                }
                let (dl, dr) = (dofs(cl.unwrap(), j), dofs(cr.unwrap(), j));
                for (m, v) in o.iter_mut().enumerate() {
                    let mut r = 0.0;
                    if self.ux != 0.0 {
                        r -= self.ux / hx * (ap * dot(&tb.edge_normal[RIGHT][m], dl) + am * dot(&tb.edge_normal[LEFT][m], dr));
                    }
                    if self.uy != 0.0 {
                        r -= self.uy / hy * dot(&tb.edge_tangential[RIGHT][m], dl);
                    }
                    *v = r;
                }
            }
        };
        let yedge_row = |q: usize, out: &mut [f64]| {
            for i in 0..l.nx {
                let o = &mut out[i * l.ke..(i + 1) * l.ke];
                let (cb, ca) = (gy.left_cell(q), gy.right_cell(q));
                if let (Some(d), true) = (data, cb.is_none() || ca.is_none()) {
                    let (xc, y) = (gx.cell_center(i), gy.interface_x(q));
                    for (m, v) in o.iter_mut().enumerate() {
                        *v = self.edge_time_derivative(d, t, m, |s| (xc + hx * s, y));
                    }
                    continue;
                }
                let (db, da) = (dofs(i, cb.unwrap()), dofs(i, ca.unwrap()));
                for (m, v) in o.iter_mut().enumerate() {
                    let mut r = 0.0;
                    if self.uy != 0.0 {
                        r -= self.uy / hy * (bp * dot(&tb.edge_normal[TOP][m], db) + bm * dot(&tb.edge_normal[BOTTOM][m], da));
                    }
                    if self.ux != 0.0 {
                        r -= self.ux / hx * dot(&tb.edge_tangential[TOP][m], db);
                    }
                    *v = r;
                }
            }
        };
        let cell_row = |j: usize, out: &mut [f64]| {
            for i in 0..l.nx {
                let d = dofs(i, j);
                for s in 0..l.n_mom {
                    out[i * l.n_mom + s] = -self.ux / hx * dot(&tb.cell_x[s], d) - self.uy / hy * dot(&tb.cell_y[s], d);
                }
            }
        };
        if self.parallel {
            d_nodes.par_chunks_mut(l.nix).enumerate().for_each(|(q, o)| node_row(q, o));
            d_x.par_chunks_mut(l.nix * l.ke).enumerate().for_each(|(j, o)| xedge_row(j, o));
            d_y.par_chunks_mut(l.nx * l.ke).enumerate().for_each(|(q, o)| yedge_row(q, o));
            d_c.par_chunks_mut(l.nx * l.n_mom).enumerate().for_each(|(j, o)| cell_row(j, o));
        } else {
            d_nodes.chunks_mut(l.nix).enumerate().for_each(|(q, o)| node_row(q, o));
            d_x.chunks_mut(l.nix * l.ke).enumerate().for_each(|(j, o)| xedge_row(j, o));
            d_y.chunks_mut(l.nx * l.ke).enumerate().for_each(|(q, o)| yedge_row(q, o));
            d_c.chunks_mut(l.nx * l.n_mom).enumerate().for_each(|(j, o)| cell_row(j, o));
        }
        Ok(())
    }
}
