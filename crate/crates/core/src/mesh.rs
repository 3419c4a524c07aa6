//! Cartesian grids, state containers and dof bookkeeping.
//!
//! States are thin wrappers around a flat `Vec<f64>` so that the time
//! integrators can treat them as plain vectors. AF states store each dof
//! family contiguously (all point values, then all moments); DG states store
//! one contiguous coefficient block per cell.

use std::io::Write;

use crate::error::{Error, Result};
use crate::poly::{gauss_legendre_rule, legendre, AfBasis, QuadratureRule};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub periodic: bool,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize, periodic: bool) -> Result<Self> {
        if n_cells == 0 || x_max.partial_cmp(&x_min) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::Config(format!(
                "invalid grid [{x_min}, {x_max}] with {n_cells} cells"
            )));
        }
        Ok(Self { x_min, x_max, n_cells, dx: (x_max - x_min) / n_cells as f64, periodic })
    }

    pub fn unit_periodic(n_cells: usize) -> Self {
        Self::new(0.0, 1.0, n_cells, true).expect("unit grid is valid")
    }

    /// `n_cells` for periodic grids (the last interface is the first one),
    /// `n_cells + 1` otherwise.
    pub fn n_interfaces(&self) -> usize {
        if self.periodic {
            self.n_cells
        } else {
            self.n_cells + 1
        }
    }

    pub fn interface_x(&self, p: usize) -> f64 {
        self.x_min + p as f64 * self.dx
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx
    }

    pub fn left_interface(&self, i: usize) -> usize {
        i
    }

    pub fn right_interface(&self, i: usize) -> usize {
        if self.periodic {
            (i + 1) % self.n_cells
        } else {
            i + 1
        }
    }

    /// Cell to the left of interface `p`, if any.
    pub fn left_cell(&self, p: usize) -> Option<usize> {
        if p > 0 {
            Some(p - 1)
        } else if self.periodic {
            Some(self.n_cells - 1)
        } else {
            None
        }
    }

    /// Cell to the right of interface `p`, if any.
    pub fn right_cell(&self, p: usize) -> Option<usize> {
        if p < self.n_cells {
            Some(p)
        } else {
            None
        }
    }

    /// Interfaces whose dofs follow the boundary data instead of the scheme.
    pub fn is_boundary_interface(&self, p: usize) -> bool {
        !self.periodic && (p == 0 || p == self.n_cells)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn unit_square(n: usize, periodic: bool) -> Self {
        let g = Grid1D::new(0.0, 1.0, n, periodic).expect("unit grid is valid");
        Self { x: g.clone(), y: g }
    }

    pub fn n_cells(&self) -> usize {
        self.x.n_cells * self.y.n_cells
    }
}

/// Index arithmetic for 1-d AF states: `m` components, `K` moments per cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Af1dLayout {
    pub k: usize,
    pub m: usize,
    pub n_cells: usize,
    pub n_interfaces: usize,
}

impl Af1dLayout {
    pub fn new(grid: &Grid1D, k: usize, m: usize) -> Self {
        Self { k, m, n_cells: grid.n_cells, n_interfaces: grid.n_interfaces() }
    }

    pub fn len(&self) -> usize {
        (self.n_interfaces + self.n_cells * self.k) * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, p: usize, c: usize) -> usize {
        p * self.m + c
    }

    pub fn moments_offset(&self) -> usize {
        self.n_interfaces * self.m
    }

    pub fn moment(&self, i: usize, k: usize, c: usize) -> usize {
        self.moments_offset() + (i * self.k + k) * self.m + c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AfState1D {
    pub layout: Af1dLayout,
    pub data: Vec<f64>,
}

impl AfState1D {
    pub fn zeros(layout: Af1dLayout) -> Self {
        Self { layout, data: vec![0.0; layout.len()] }
    }

    pub fn point(&self, p: usize, c: usize) -> f64 {
        self.data[self.layout.point(p, c)]
    }

    pub fn moment(&self, i: usize, k: usize, c: usize) -> f64 {
        self.data[self.layout.moment(i, k, c)]
    }

    /// Point values are samples of `f`; moments are computed with `rule`.
    pub fn from_fn(
        grid: &Grid1D,
        k: usize,
        m: usize,
        rule: &QuadratureRule,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Self {
        let layout = Af1dLayout::new(grid, k, m);
        let mut s = Self::zeros(layout);
        for p in 0..layout.n_interfaces {
            let v = f(grid.interface_x(p));
            for c in 0..m {
                s.data[layout.point(p, c)] = v[c];
            }
        }
        let weights: Vec<_> = (0..k).map(AfBasis::moment_weight).collect();
        for i in 0..grid.n_cells {
            let xc = grid.cell_center(i);
            let samples: Vec<Vec<f64>> = rule.nodes.iter().map(|&xi| f(xc + grid.dx * xi)).collect();
            for (kk, b) in weights.iter().enumerate() {
                for c in 0..m {
                    let integral: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .zip(&samples)
                        .map(|((&xi, &w), v)| w * b.eval(xi) * v[c])
                        .sum();
                    s.data[layout.moment(i, kk, c)] = (kk + 1) as f64 * integral;
                }
            }
        }
        s
    }
}

/// Index arithmetic for 1-d DG states.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dg1dLayout {
    pub k: usize,
    pub m: usize,
    pub n_cells: usize,
}

impl Dg1dLayout {
    pub fn len(&self) -> usize {
        self.n_cells * (self.k + 1) * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self) -> usize {
        (self.k + 1) * self.m
    }

    pub fn index(&self, i: usize, n: usize, c: usize) -> usize {
        (i * (self.k + 1) + n) * self.m + c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgState1D {
    pub layout: Dg1dLayout,
    pub data: Vec<f64>,
}

impl DgState1D {
    pub fn zeros(k: usize, m: usize, n_cells: usize) -> Self {
        let layout = Dg1dLayout { k, m, n_cells };
        Self { layout, data: vec![0.0; layout.len()] }
    }

    pub fn coeff(&self, i: usize, n: usize, c: usize) -> f64 {
        self.data[self.layout.index(i, n, c)]
    }

    /// Cell-wise L² projection of `f`.
    pub fn from_fn(grid: &Grid1D, k: usize, m: usize, rule: &QuadratureRule, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut s = Self::zeros(k, m, grid.n_cells);
        let phis: Vec<_> = (0..=k).map(legendre).collect();
        for i in 0..grid.n_cells {
            let xc = grid.cell_center(i);
            let samples: Vec<Vec<f64>> = rule.nodes.iter().map(|&xi| f(xc + grid.dx * xi)).collect();
            for (n, phi) in phis.iter().enumerate() {
                for c in 0..m {
                    let integral: f64 = rule
                        .nodes
                        .iter()
                        .zip(&rule.weights)
                        .zip(&samples)
                        .map(|((&xi, &w), v)| w * phi.eval(xi) * v[c])
                        .sum();
                    let idx = s.layout.index(i, n, c);
                    s.data[idx] = (2 * n + 1) as f64 * integral;
                }
            }
        }
        s
    }
}

/// Which data the 2-d AF edges carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Af2dVariant {
    /// `K` edge moments per edge; `K = 1` gives edge averages.
    Tensorial,
    /// Edge midpoint values (third order only).
    ClassicalMidpoint,
}

/// Index arithmetic for 2-d AF states.
///
/// Families: nodes `(p, q)`, x-edges (normal along x, at `x_p`, spanning cell
/// row `j`) with `K` moments in `y`, y-edges likewise, and `K²` cell moments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Af2dLayout {
    pub k: usize,
    pub nx: usize,
    pub ny: usize,
    pub nix: usize,
    pub niy: usize,
    pub variant: Af2dVariant,
}

impl Af2dLayout {
    pub fn new(grid: &Grid2D, k: usize, variant: Af2dVariant) -> Self {
        Self {
            k,
            nx: grid.x.n_cells,
            ny: grid.y.n_cells,
            nix: grid.x.n_interfaces(),
            niy: grid.y.n_interfaces(),
            variant,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nix * self.niy
    }

    pub fn n_xedge(&self) -> usize {
        self.nix * self.ny * self.k
    }

    pub fn n_yedge(&self) -> usize {
        self.nx * self.niy * self.k
    }

    pub fn n_cell(&self) -> usize {
        self.nx * self.ny * self.k * self.k
    }

    pub fn len(&self) -> usize {
        self.n_nodes() + self.n_xedge() + self.n_yedge() + self.n_cell()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, p: usize, q: usize) -> usize {
        q * self.nix + p
    }

    pub fn xedge(&self, p: usize, j: usize, l: usize) -> usize {
        self.n_nodes() + (j * self.nix + p) * self.k + l
    }

    pub fn yedge(&self, i: usize, q: usize, k: usize) -> usize {
        self.n_nodes() + self.n_xedge() + (q * self.nx + i) * self.k + k
    }

    pub fn cell(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        self.n_nodes() + self.n_xedge() + self.n_yedge() + ((j * self.nx + i) * self.k + k) * self.k + l
    }

    /// Family boundaries `[nodes, x-edges, y-edges, cells]` in the flat vector.
    pub fn family_ranges(&self) -> [std::ops::Range<usize>; 4] {
        let a = self.n_nodes();
        let b = a + self.n_xedge();
        let c = b + self.n_yedge();
        [0..a, a..b, b..c, c..self.len()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AfState2D {
    pub layout: Af2dLayout,
    pub data: Vec<f64>,
}

impl AfState2D {
    pub fn zeros(layout: Af2dLayout) -> Self {
        Self { layout, data: vec![0.0; layout.len()] }
    }

    /// Samples nodes (and midpoints for the classical variant), integrates
    /// edge and cell moments with `rule`.
    pub fn from_fn(
        grid: &Grid2D,
        k: usize,
        variant: Af2dVariant,
        rule: &QuadratureRule,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if variant == Af2dVariant::ClassicalMidpoint && k != 1 {
            return Err(Error::Unsupported("classical midpoint AF is third order (K = 1) only".into()));
        }
        let layout = Af2dLayout::new(grid, k, variant);
        let mut s = Self::zeros(layout);
        let weights: Vec<_> = (0..k).map(AfBasis::moment_weight).collect();
        let edge_moment = |l: usize, g: &dyn Fn(f64) -> f64| -> f64 {
            (l + 1) as f64
                * rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| w * weights[l].eval(t) * g(t))
                    .sum::<f64>()
        };
        for q in 0..layout.niy {
            for p in 0..layout.nix {
                s.data[layout.node(p, q)] = f(grid.x.interface_x(p), grid.y.interface_x(q));
            }
        }
        for j in 0..layout.ny {
            let yc = grid.y.cell_center(j);
            for p in 0..layout.nix {
                let x = grid.x.interface_x(p);
                for l in 0..k {
                    s.data[layout.xedge(p, j, l)] = match variant {
                        Af2dVariant::Tensorial => edge_moment(l, &|t| f(x, yc + grid.y.dx * t)),
                        Af2dVariant::ClassicalMidpoint => f(x, yc),
                    };
                }
            }
        }
        for q in 0..layout.niy {
            let y = grid.y.interface_x(q);
            for i in 0..layout.nx {
                let xc = grid.x.cell_center(i);
                for kk in 0..k {
                    s.data[layout.yedge(i, q, kk)] = match variant {
                        Af2dVariant::Tensorial => edge_moment(kk, &|t| f(xc + grid.x.dx * t, y)),
                        Af2dVariant::ClassicalMidpoint => f(xc, y),
                    };
                }
            }
        }
        for j in 0..layout.ny {
            let yc = grid.y.cell_center(j);
            for i in 0..layout.nx {
                let xc = grid.x.cell_center(i);
                for kk in 0..k {
                    for l in 0..k {
                        let mut acc = 0.0;
                        for (&xi, &wx) in rule.nodes.iter().zip(&rule.weights) {
                            let bx = weights[kk].eval(xi);
                            for (&eta, &wy) in rule.nodes.iter().zip(&rule.weights) {
                                acc += wx * wy * bx * weights[l].eval(eta) * f(xc + grid.x.dx * xi, yc + grid.y.dx * eta);
                            }
                        }
                        s.data[layout.cell(i, j, kk, l)] = ((kk + 1) * (l + 1)) as f64 * acc;
                    }
                }
            }
        }
        Ok(s)
    }

    /// Writes one CSV row per dof: `family,i,j,component,value`. Edge and cell
    /// moment indices are folded into `component`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let l = &self.layout;
        writeln!(w, "family,i,j,component,value")?;
        for q in 0..l.niy {
            for p in 0..l.nix {
                writeln!(w, "node,{p},{q},0,{:.16e}", self.data[l.node(p, q)])?;
            }
        }
        for j in 0..l.ny {
            for p in 0..l.nix {
                for m in 0..l.k {
                    writeln!(w, "xedge,{p},{j},{m},{:.16e}", self.data[l.xedge(p, j, m)])?;
                }
            }
        }
        for q in 0..l.niy {
            for i in 0..l.nx {
                for m in 0..l.k {
                    writeln!(w, "yedge,{i},{q},{m},{:.16e}", self.data[l.yedge(i, q, m)])?;
                }
            }
        }
        for j in 0..l.ny {
            for i in 0..l.nx {
                for a in 0..l.k {
                    for b in 0..l.k {
                        writeln!(w, "cell,{i},{j},{},{:.16e}", a * l.k + b, self.data[l.cell(i, j, a, b)])?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index arithmetic for 2-d tensor-product DG states (scalar).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dg2dLayout {
    pub k: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Dg2dLayout {
    pub fn block(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.block()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_offset(&self, i: usize, j: usize) -> usize {
        (j * self.nx + i) * self.block()
    }

    pub fn index(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        self.cell_offset(i, j) + a * (self.k + 1) + b
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgState2D {
    pub layout: Dg2dLayout,
    pub data: Vec<f64>,
}

impl DgState2D {
    pub fn zeros(k: usize, nx: usize, ny: usize) -> Self {
        let layout = Dg2dLayout { k, nx, ny };
        Self { layout, data: vec![0.0; layout.len()] }
    }

    pub fn coeff(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.data[self.layout.index(i, j, a, b)]
    }

    pub fn block(&self, i: usize, j: usize) -> &[f64] {
        let o = self.layout.cell_offset(i, j);
        &self.data[o..o + self.layout.block()]
    }

    /// Cell-wise tensor L² projection of `f`.
    pub fn from_fn(grid: &Grid2D, k: usize, rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut s = Self::zeros(k, grid.x.n_cells, grid.y.n_cells);
        let phis: Vec<_> = (0..=k).map(legendre).collect();
        let table: Vec<Vec<f64>> = phis.iter().map(|p| rule.nodes.iter().map(|&x| p.eval(x)).collect()).collect();
        for j in 0..grid.y.n_cells {
            let yc = grid.y.cell_center(j);
            for i in 0..grid.x.n_cells {
                let xc = grid.x.cell_center(i);
                let samples: Vec<f64> = rule
                    .nodes
                    .iter()
                    .flat_map(|&xi| rule.nodes.iter().map(move |&eta| (xi, eta)))
                    .map(|(xi, eta)| f(xc + grid.x.dx * xi, yc + grid.y.dx * eta))
                    .collect();
                let nq = rule.len();
                for a in 0..=k {
                    for b in 0..=k {
                        let mut acc = 0.0;
                        for qx in 0..nq {
                            for qy in 0..nq {
                                acc += rule.weights[qx] * rule.weights[qy] * table[a][qx] * table[b][qy] * samples[qx * nq + qy];
                            }
                        }
                        let idx = s.layout.index(i, j, a, b);
                        s.data[idx] = ((2 * a + 1) * (2 * b + 1)) as f64 * acc;
                    }
                }
            }
        }
        s
    }
}

/// Simpson's rule along an edge: `(end1 + 4·mid + end2) / 6`.
pub fn simpson_average(end1: f64, mid: f64, end2: f64) -> f64 {
    (end1 + 4.0 * mid + end2) / 6.0
}

/// Inverse of [`simpson_average`] for the midpoint value.
pub fn simpson_midpoint(average: f64, end1: f64, end2: f64) -> f64 {
    (6.0 * average - end1 - end2) / 4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodFamily {
    Af,
    Dg,
}

/// Per-cell dof counts of the methods in the runtime comparison. AF edge and
/// node counts are `None` for DG.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DofCounts {
    pub n_dofs: usize,
    pub n_tdofs: usize,
    pub n_mom: usize,
    pub n_edge: Option<usize>,
    pub n_node: Option<usize>,
}

/// Dof counts of the reduced (serendipity-type) AF family and tensor DG.
pub fn dof_counts(family: MethodFamily, order: usize) -> Result<DofCounts> {
    match family {
        MethodFamily::Af => {
            if order < 3 {
                return Err(Error::InvalidOrder(format!("AF order must be >= 3, got {order}")));
            }
            let n_node = 4;
            let n_edge = 4 * (order - 2);
            let n_mom = if order >= 4 { ((order - 4) * (order - 3) / 2).max(1) } else { 1 };
            Ok(DofCounts {
                n_dofs: n_node / 4 + n_edge / 2 + n_mom,
                n_tdofs: n_node + n_edge + n_mom,
                n_mom,
                n_edge: Some(n_edge),
                n_node: Some(n_node),
            })
        }
        MethodFamily::Dg => {
            if order < 1 {
                return Err(Error::InvalidOrder("DG order must be >= 1".into()));
            }
            let n = order * order;
            Ok(DofCounts { n_dofs: n, n_tdofs: n, n_mom: n, n_edge: None, n_node: None })
        }
    }
}

/// Quadrature parameter and CFL number of a method in the runtime comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodEntry {
    pub family: MethodFamily,
    pub order: usize,
    pub n_int: usize,
    pub cfl: f64,
}

const AF_ENTRIES: [(usize, usize, f64); 5] = [(3, 3, 0.27), (4, 3, 0.2), (5, 5, 0.17), (6, 7, 0.12), (7, 9, 0.085)];
const DG_ENTRIES: [(usize, usize, f64); 5] = [(2, 3, 0.2), (3, 5, 0.1), (4, 7, 0.05), (5, 9, 0.02), (6, 11, 0.01)];

/// The catalog: AF orders 3–7 and DG orders 2–6.
pub fn method_catalog() -> Vec<MethodEntry> {
    let af = AF_ENTRIES.iter().map(|&(order, n_int, cfl)| MethodEntry { family: MethodFamily::Af, order, n_int, cfl });
    let dg = DG_ENTRIES.iter().map(|&(order, n_int, cfl)| MethodEntry { family: MethodFamily::Dg, order, n_int, cfl });
    af.chain(dg).collect()
}

pub fn method_entry(family: MethodFamily, order: usize) -> Option<MethodEntry> {
    method_catalog().into_iter().find(|e| e.family == family && e.order == order)
}

/// Gauss rule exact to degree `n_int` (the quadrature parameter of a method).
pub fn rule_for_n_int(n_int: usize) -> QuadratureRule {
    gauss_legendre_rule(n_int / 2 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dof_table_rows() {
        let af = |o| dof_counts(MethodFamily::Af, o).unwrap();
        assert_eq!(af(5), DofCounts { n_dofs: 8, n_tdofs: 17, n_mom: 1, n_edge: Some(12), n_node: Some(4) });
        assert_eq!(af(7), DofCounts { n_dofs: 17, n_tdofs: 30, n_mom: 6, n_edge: Some(20), n_node: Some(4) });
        assert_eq!(af(3).n_mom, 1);
        let expected = [(3, 4, 9, 1, 4), (4, 6, 13, 1, 8), (5, 8, 17, 1, 12), (6, 12, 23, 3, 16), (7, 17, 30, 6, 20)];
        for (o, d, t, m, e) in expected {
            let c = af(o);
            assert_eq!((c.n_dofs, c.n_tdofs, c.n_mom, c.n_edge), (d, t, m, Some(e)));
        }
        let dg = dof_counts(MethodFamily::Dg, 4).unwrap();
        assert_eq!((dg.n_dofs, dg.n_tdofs, dg.n_mom), (16, 16, 16));
        assert!(dof_counts(MethodFamily::Af, 2).is_err());
        assert!(dof_counts(MethodFamily::Dg, 0).is_err());
    }

    #[test]
    fn simpson_conversion() {
        assert_eq!(simpson_average(1.0, 1.0, 1.0), 1.0);
        assert_abs_diff_eq!(simpson_average(0.0, 1.0, 0.0), 2.0 / 3.0, epsilon = 1e-16);
        let mid = 0.37;
        let avg = simpson_average(0.2, mid, -1.1);
        assert_abs_diff_eq!(simpson_midpoint(avg, 0.2, -1.1), mid, epsilon = 1e-15);
        // exact on quadratic traces
        let (a, b, c) = (1.3, -0.7, 0.25);
        let q = |t: f64| a * t * t + b * t + c;
        let exact = a / 12.0 + c;
        assert_abs_diff_eq!(simpson_average(q(-0.5), q(0.0), q(0.5)), exact, epsilon = 1e-15);
    }

    #[test]
    fn constant_fill() {
        let grid = Grid1D::unit_periodic(5);
        let rule = gauss_legendre_rule(12);
        let af = AfState1D::from_fn(&grid, 4, 1, &rule, |_| vec![1.0]);
        for i in 0..5 {
            for k in 0..4 {
                let expected = if k % 2 == 0 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(af.moment(i, k, 0), expected, epsilon = 1e-14);
            }
        }
        let dg = DgState1D::from_fn(&grid, 3, 1, &rule, |_| vec![1.0]);
        for i in 0..5 {
            assert_abs_diff_eq!(dg.coeff(i, 0, 0), 1.0, epsilon = 1e-14);
            for n in 1..=3 {
                assert_abs_diff_eq!(dg.coeff(i, n, 0), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn linear_fill_k1() {
        // one cell [0, 2]: x = 1 + 2ξ, projection coefficient of φ_1 = 2ξ is 1.
        let grid = Grid1D::new(0.0, 2.0, 1, true).unwrap();
        let dg = DgState1D::from_fn(&grid, 1, 1, &gauss_legendre_rule(4), |x| vec![x]);
        assert_abs_diff_eq!(dg.coeff(0, 0, 0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dg.coeff(0, 1, 0), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn grid_topology() {
        let g = Grid1D::unit_periodic(4);
        assert_eq!(g.n_interfaces(), 4);
        assert_eq!(g.right_interface(3), 0);
        assert_eq!(g.left_cell(0), Some(3));
        let d = Grid1D::new(0.0, 1.0, 4, false).unwrap();
        assert_eq!(d.n_interfaces(), 5);
        assert_eq!(d.right_interface(3), 4);
        assert_eq!(d.left_cell(0), None);
        assert_eq!(d.right_cell(4), None);
        assert!(Grid1D::new(1.0, 0.0, 4, true).is_err());
    }

    #[test]
    fn af2d_layout_is_dense() {
        let grid = Grid2D::unit_square(3, false);
        let l = Af2dLayout::new(&grid, 2, Af2dVariant::Tensorial);
        let mut seen = vec![false; l.len()];
        for q in 0..l.niy {
            for p in 0..l.nix {
                seen[l.node(p, q)] = true;
            }
        }
        for j in 0..l.ny {
            for p in 0..l.nix {
                for m in 0..2 {
                    seen[l.xedge(p, j, m)] = true;
                }
            }
        }
        for q in 0..l.niy {
            for i in 0..l.nx {
                for m in 0..2 {
                    seen[l.yedge(i, q, m)] = true;
                }
            }
        }
        for j in 0..l.ny {
            for i in 0..l.nx {
                for a in 0..2 {
                    for b in 0..2 {
                        seen[l.cell(i, j, a, b)] = true;
                    }
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn catalog_lookup() {
        let af3 = method_entry(MethodFamily::Af, 3).unwrap();
        assert_eq!(af3.cfl, 0.27);
        assert_eq!(method_entry(MethodFamily::Dg, 4).unwrap().cfl, 0.05);
        assert!(method_entry(MethodFamily::Dg, 9).is_none());
        assert_eq!(rule_for_n_int(3).len(), 2);
        assert_eq!(rule_for_n_int(11).len(), 6);
    }
}
