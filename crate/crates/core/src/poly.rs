//! Univariate polynomials on the reference cell `ξ ∈ [-1/2, 1/2]`.
//!
//! Everything here lives on the unit reference cell; a physical cell of width
//! `Δx` maps onto it through `x = Δx·ξ`, so physical derivatives pick up a
//! factor `1/Δx` (see [`eval_and_derivative`]).
//!
//! The module provides Legendre polynomials normalized to `1` at `ξ = 1/2`,
//! the pair of Radau polynomials `R_L`, `R_R` used by Active Flux, the dual
//! basis to the Active Flux degrees of freedom, Gauss–Legendre rules and the
//! L² / Gauss–Radau projections.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Left end of the reference cell.
pub const XI_LEFT: f64 = -0.5;
/// Right end of the reference cell.
pub const XI_RIGHT: f64 = 0.5;

/// Number of Gauss–Legendre points used to project non-polynomial data.
pub const PROJECTION_POINTS: usize = 12;

/// `∫_{-1/2}^{1/2} ξ^k dξ`.
pub fn monomial_integral(k: usize) -> f64 {
    if k % 2 == 1 {
        0.0
    } else {
        0.5f64.powi(k as i32) / (k + 1) as f64
    }
}

/// A polynomial in monomial form, `p(ξ) = Σ c_k ξ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a polynomial needs at least one coefficient");
        Self { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        Self { coeffs: vec![0.0; degree + 1] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `ξ^k`
    pub fn monomial(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    /// Nominal degree, i.e. `coeffs.len() - 1`. Trailing zeros are kept unless
    /// [`Poly::trimmed`] is called.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Drops trailing coefficients with magnitude `<= tol`.
    pub fn trimmed(mut self, tol: f64) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.abs() <= tol) {
            self.coeffs.pop();
        }
        self
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * xi + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Poly { coeffs }
    }

    /// Integral over the reference cell.
    pub fn integral(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| c * monomial_integral(k))
            .sum()
    }

    /// `∫ self · other dξ` over the reference cell.
    pub fn inner(&self, other: &Poly) -> f64 {
        let mut s = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                s += a * b * monomial_integral(i + j);
            }
        }
        s
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// `p(-ξ)`
    pub fn reflect(&self) -> Poly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 1 { -c } else { c })
            .collect();
        Poly { coeffs }
    }

    /// `self + s·other`
    pub fn add_scaled(&self, s: f64, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                self.coeffs.get(k).copied().unwrap_or(0.0)
                    + s * other.coeffs.get(k).copied().unwrap_or(0.0)
            })
            .collect();
        Poly { coeffs }
    }

    /// Divides by `(ξ - root)`, discarding the remainder (which is `p(root)`).
    pub fn deflate(&self, root: f64) -> Poly {
        let n = self.coeffs.len();
        if n == 1 {
            return Poly::constant(0.0);
        }
        let mut quotient = vec![0.0; n - 1];
        let mut carry = 0.0;
        for k in (1..n).rev() {
            carry = carry * root + self.coeffs[k];
            quotient[k - 1] = carry;
        }
        Poly { coeffs: quotient }
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.add_scaled(-1.0, rhs)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut coeffs = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Poly { coeffs }
    }
}

/// Value and physical derivative of `p` at reference point `xi` on a cell of
/// width `dx`.
pub fn eval_and_derivative(p: &Poly, xi: f64, dx: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut slope = 0.0;
    for &c in p.coeffs.iter().rev() {
        slope = slope * xi + value;
        value = value * xi + c;
    }
    (value, slope / dx)
}

/// Legendre polynomial of degree `n`, orthogonal to `P^{n-1}` on the reference
/// cell and normalized to `1` at `ξ = 1/2`.
pub fn legendre(n: usize) -> Poly {
    // three-term recurrence in t = 2ξ
    let t = Poly::new(vec![0.0, 2.0]);
    let mut prev = Poly::constant(1.0);
    if n == 0 {
        return prev;
    }
    let mut cur = t.clone();
    for k in 1..n {
        let kf = k as f64;
        let next = (&t * &cur)
            .scale((2.0 * kf + 1.0) / (kf + 1.0))
            .add_scaled(-kf / (kf + 1.0), &prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// Which end of the cell a Radau polynomial is attached to.
///
/// `Left` is `R_L` (value 1 at `ξ = -1/2`, zero at `ξ = 1/2`), `Right` is `R_R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadauSide {
    Left,
    Right,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidOrder("Radau/Active Flux bases need K >= 1".into()));
    }
    Ok(())
}

/// `(R_L, R_R)` of degree `K+1` built from the two highest Legendre polynomials.
pub fn radau_pair(k: usize) -> Result<(Poly, Poly)> {
    check_k(k)?;
    let upper = legendre(k + 1);
    let lower = legendre(k);
    let sign = if (k + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let r_l = (&upper - &lower).scale(0.5 * sign);
    let r_r = (&upper + &lower).scale(0.5);
    Ok((r_l, r_r))
}

/// `(R_L, R_R)` obtained from the `(K+2)`-dimensional interpolation/orthogonality
/// system. Must agree with [`radau_pair`].
pub fn radau_pair_by_system(k: usize) -> Result<(Poly, Poly)> {
    let basis = moment_dual_basis(k)?;
    Ok((basis.r_l, basis.r_r))
}

/// Zeros of `R_L` (side `Left`) or `R_R` (side `Right`), sorted ascending.
pub fn radau_points(k: usize, side: RadauSide) -> Result<Vec<f64>> {
    let (r_l, r_r) = radau_pair(k)?;
    let (poly, endpoint) = match side {
        RadauSide::Left => (r_l, XI_RIGHT),
        RadauSide::Right => (r_r, XI_LEFT),
    };
    let reduced = poly.deflate(endpoint);
    let mut roots = bracketed_roots(&reduced, XI_LEFT, XI_RIGHT, 200, 1e-14)?;
    if roots.len() != k {
        return Err(Error::RootFinding(format!(
            "expected {k} interior zeros of the Radau polynomial, found {}",
            roots.len()
        )));
    }
    roots.push(endpoint);
    roots.sort_by(|a, b| a.total_cmp(b));
    for &r in &roots {
        if poly.eval(r).abs() > 1e-12 {
            return Err(Error::RootFinding(format!(
                "residual {:e} at {r} exceeds 1e-12",
                poly.eval(r)
            )));
        }
    }
    Ok(roots)
}

/// Sign-change scan followed by bisection.
fn bracketed_roots(p: &Poly, lo: f64, hi: f64, samples: usize, tol: f64) -> Result<Vec<f64>> {
    let grid: Vec<f64> = (0..=samples)
        .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| p.eval(x)).collect();
    let mut roots = Vec::new();
    for i in 0..samples {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        if fb == 0.0 {
            // picked up as `fa == 0` of the next interval
            continue;
        }
        let (mut a, mut b, mut fa) = (a, b, fa);
        let mut iterations = 0;
        while b - a > tol {
            let m = 0.5 * (a + b);
            let fm = p.eval(m);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
            iterations += 1;
            if iterations > 200 {
                return Err(Error::RootFinding(format!(
                    "bisection did not converge in [{a}, {b}]"
                )));
            }
        }
        roots.push(0.5 * (a + b));
    }
    if values[samples] == 0.0 {
        roots.push(hi);
    }
    Ok(roots)
}

/// The basis of `P^{K+1}` dual to the Active Flux degrees of freedom of one
/// cell: the two endpoint values and the `K` moments
/// `A_k ∫ b_k q dξ` with `b_k = (2ξ)^k`, `A_k = k+1`.
#[derive(Clone, Debug)]
pub struct AfBasis {
    pub k: usize,
    pub r_l: Poly,
    pub r_r: Poly,
    /// `S_0 .. S_{K-1}`
    pub s: Vec<Poly>,
    /// Moment weights `b_k`.
    pub b: Vec<Poly>,
    /// Moment normalizations `A_k`.
    pub a: Vec<f64>,
}

impl AfBasis {
    pub fn moment_weight(k: usize) -> Poly {
        let mut c = vec![0.0; k + 1];
        c[k] = 2f64.powi(k as i32);
        Poly::new(c)
    }

    /// Basis functions in dof order `[R_L, S_0, …, S_{K-1}, R_R]`.
    pub fn ordered(&self) -> Vec<&Poly> {
        let mut v = Vec::with_capacity(self.k + 2);
        v.push(&self.r_l);
        v.extend(self.s.iter());
        v.push(&self.r_r);
        v
    }

    /// Moment `A_k ∫ b_k p dξ` of a polynomial.
    pub fn moment_of(&self, k: usize, p: &Poly) -> f64 {
        self.a[k] * self.b[k].inner(p)
    }

    /// `c_k = A_k ∫ b_k dξ`, the moments of the constant 1.
    pub fn constant_moments(&self) -> Vec<f64> {
        (0..self.k).map(|k| self.a[k] * self.b[k].integral()).collect()
    }

    /// Polynomial with the given endpoint values and moments.
    pub fn reconstruct(&self, left: f64, moments: &[f64], right: f64) -> Poly {
        let mut p = self.r_l.scale(left).add_scaled(right, &self.r_r);
        for (m, s) in moments.iter().zip(&self.s) {
            p = p.add_scaled(*m, s);
        }
        p
    }
}

/// Builds the dual basis by inverting the functional/monomial matrix.
pub fn moment_dual_basis(k: usize) -> Result<AfBasis> {
    check_k(k)?;
    let n = k + 2;
    let b: Vec<Poly> = (0..k).map(AfBasis::moment_weight).collect();
    let a: Vec<f64> = (0..k).map(|m| (m + 1) as f64).collect();
    // Unknowns are Legendre coefficients; the monomial version of this system
    // loses a couple of digits by K = 6.
    let cols: Vec<Poly> = (0..n).map(legendre).collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        m[(0, j)] = col.eval(XI_LEFT);
        m[(1, j)] = col.eval(XI_RIGHT);
        for row in 0..k {
            m[(2 + row, j)] = a[row] * b[row].inner(col);
        }
    }
    let lu = m.clone().lu();
    let mut inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Singular(format!("Active Flux dof system for K = {k}")))?;
    // two rounds of iterative refinement
    for _ in 0..2 {
        let residual = DMatrix::<f64>::identity(n, n) - &m * &inv;
        if let Some(correction) = lu.solve(&residual) {
            inv += correction;
        }
    }
    let column = |c: usize| {
        let mut p = Poly::zero(n - 1);
        for (j, col) in cols.iter().enumerate() {
            p = p.add_scaled(inv[(j, c)], col);
        }
        p
    };
    let r_l = column(0);
    let r_r = column(1);
    let s = (0..k).map(|i| column(2 + i)).collect();
    Ok(AfBasis { k, r_l, r_r, s, b, a })
}

/// A quadrature rule on the reference cell, normalized to total weight 1.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rule with the fewest Gauss points that integrates degree `degree` exactly.
    pub fn exact_for(degree: usize) -> Self {
        gauss_legendre_rule(degree / 2 + 1)
    }
}

/// `n`-point Gauss–Legendre rule on `[-1/2, 1/2]`.
pub fn gauss_legendre_rule(n_points: usize) -> QuadratureRule {
    assert!(n_points >= 1, "a quadrature rule needs at least one point");
    let n = n_points;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_standard(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_standard(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -0.5 * x;
        nodes[n - 1 - i] = 0.5 * x;
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights, exactness_degree: 2 * n - 1 }
}

/// Standard Legendre `P_n(x)` on `[-1, 1]` and its derivative.
fn legendre_standard(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionKind {
    L2,
    /// Interpolates at `ξ = -1/2`.
    GaussRadauLeft,
    /// Interpolates at `ξ = 1/2`.
    GaussRadauRight,
}

/// Projection of `f` onto `P^K` with the default 12-point rule.
pub fn project(f: impl Fn(f64) -> f64, k: usize, kind: ProjectionKind) -> Result<Poly> {
    project_with_rule(f, k, kind, &gauss_legendre_rule(PROJECTION_POINTS))
}

/// Projection of `f` onto `P^K`, moments evaluated with `rule`.
pub fn project_with_rule(
    f: impl Fn(f64) -> f64,
    k: usize,
    kind: ProjectionKind,
    rule: &QuadratureRule,
) -> Result<Poly> {
    if kind != ProjectionKind::L2 && k == 0 {
        return Err(Error::InvalidOrder("Gauss–Radau projection needs K >= 1".into()));
    }
    let legendres: Vec<Poly> = (0..=k).map(legendre).collect();
    let samples: Vec<f64> = rule.nodes.iter().map(|&x| f(x)).collect();
    let mut coeffs: Vec<f64> = legendres
        .iter()
        .enumerate()
        .map(|(n, l)| {
            let moment: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .zip(&samples)
                .map(|((&x, &w), &fx)| w * fx * l.eval(x))
                .sum();
            (2 * n + 1) as f64 * moment
        })
        .collect();
    match kind {
        ProjectionKind::L2 => {}
        ProjectionKind::GaussRadauRight => {
            let lower: f64 = coeffs[..k].iter().sum();
            coeffs[k] = f(XI_RIGHT) - lower;
        }
        ProjectionKind::GaussRadauLeft => {
            let lower: f64 = coeffs[..k]
                .iter()
                .enumerate()
                .map(|(n, c)| if n % 2 == 0 { *c } else { -c })
                .sum();
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            coeffs[k] = sign * (f(XI_LEFT) - lower);
        }
    }
    let mut p = Poly::zero(k);
    for (c, l) in coeffs.iter().zip(&legendres) {
        p = p.add_scaled(*c, l);
    }
    Ok(p)
}

/// Least-squares helper used by tests and the verifier: solves a small dense
/// system, reporting singularity instead of panicking.
pub fn solve_dense(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense solve".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Gram–Schmidt on monomials with exact monomial integrals.
    fn gram_schmidt_legendre(n: usize) -> Poly {
        let mut basis: Vec<Poly> = Vec::new();
        for k in 0..=n {
            let mut p = Poly::monomial(k);
            for q in &basis {
                let c = p.inner(q) / q.inner(q);
                p = p.add_scaled(-c, q);
            }
            basis.push(p);
        }
        let p = basis.pop().unwrap();
        let end = p.eval(0.5);
        p.scale(1.0 / end)
    }

    fn assert_poly_eq(a: &Poly, b: &Poly, tol: f64) {
        let n = a.coeffs().len().max(b.coeffs().len());
        for k in 0..n {
            let x = a.coeffs().get(k).copied().unwrap_or(0.0);
            let y = b.coeffs().get(k).copied().unwrap_or(0.0);
            assert!((x - y).abs() <= tol, "coefficient {k}: {x} vs {y}");
        }
    }

    #[test]
    fn legendre_matches_gram_schmidt() {
        assert_poly_eq(&legendre(0), &Poly::constant(1.0), 0.0);
        assert_poly_eq(&legendre(1), &Poly::new(vec![0.0, 2.0]), 1e-15);
        assert_poly_eq(&legendre(2), &Poly::new(vec![-0.5, 0.0, 6.0]), 1e-14);
        for n in 0..=8 {
            assert_poly_eq(&legendre(n), &gram_schmidt_legendre(n), 1e-9);
            assert_abs_diff_eq!(legendre(n).eval(0.5), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn radau_k1_closed_form() {
        let (r_l, r_r) = radau_pair(1).unwrap();
        assert_poly_eq(&r_l, &Poly::new(vec![-0.25, -1.0, 3.0]), 1e-15);
        assert_poly_eq(&r_r, &r_l.reflect(), 1e-15);
        assert_eq!(r_l.eval(0.5), 0.0);
        assert_eq!(r_l.eval(-0.5), 1.0);
    }

    #[test]
    fn radau_routes_agree() {
        for k in 1..=5 {
            let (a_l, a_r) = radau_pair(k).unwrap();
            let (b_l, b_r) = radau_pair_by_system(k).unwrap();
            // coefficients grow like 2^K; compare relative to their size
            let scale = a_l.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
            assert_poly_eq(&a_l, &b_l, 1e-13 * scale);
            assert_poly_eq(&a_r, &b_r, 1e-13 * scale);
            assert_poly_eq(&a_r, &a_l.reflect(), 1e-14);
        }
    }

    #[test]
    fn radau_orthogonality_and_endpoints() {
        for k in 1..=5 {
            let (r_l, r_r) = radau_pair(k).unwrap();
            assert_abs_diff_eq!(r_l.eval(-0.5), 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(r_l.eval(0.5), 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(r_r.eval(-0.5), 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(r_r.eval(0.5), 1.0, epsilon = 1e-13);
            for m in 0..k {
                assert_abs_diff_eq!(r_l.inner(&Poly::monomial(m)), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(r_r.inner(&Poly::monomial(m)), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn k_zero_rejected() {
        assert!(radau_pair(0).is_err());
        assert!(moment_dual_basis(0).is_err());
        assert!(radau_points(0, RadauSide::Left).is_err());
    }

    #[test]
    fn radau_points_k1() {
        let left = radau_points(1, RadauSide::Left).unwrap();
        assert_eq!(left.len(), 2);
        assert_abs_diff_eq!(left[0], -1.0 / 6.0, epsilon = 1e-14);
        assert_eq!(left[1], 0.5);
        let right = radau_points(1, RadauSide::Right).unwrap();
        assert_eq!(right[0], -0.5);
        assert_abs_diff_eq!(right[1], 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn radau_points_k2_by_sign_changes() {
        let (r_l, _) = radau_pair(2).unwrap();
        let pts = radau_points(2, RadauSide::Left).unwrap();
        assert_eq!(pts.len(), 3);
        for w in pts.windows(2) {
            assert!(w[1] - w[0] > 1e-6);
        }
        for &p in &pts[..2] {
            assert!(r_l.eval(p).abs() <= 1e-12);
            // independent oracle: sign change across a small bracket
            assert!(r_l.eval(p - 1e-6) * r_l.eval(p + 1e-6) < 0.0);
        }
    }

    #[test]
    fn radau_points_are_roots_up_to_k5() {
        for k in 1..=5 {
            for side in [RadauSide::Left, RadauSide::Right] {
                let pts = radau_points(k, side).unwrap();
                assert_eq!(pts.len(), k + 1);
                for w in pts.windows(2) {
                    assert!(w[1] - w[0] >= 1e-6);
                }
            }
        }
    }

    #[test]
    fn dual_basis_k1() {
        let basis = moment_dual_basis(1).unwrap();
        assert_poly_eq(&basis.s[0], &Poly::new(vec![1.5, 0.0, -6.0]), 1e-13);
        let sum = &(&basis.r_l + &basis.r_r) + &basis.s[0];
        assert_poly_eq(&sum, &Poly::constant(1.0), 1e-13);
    }

    #[test]
    fn dual_basis_duality() {
        for k in 1..=5 {
            let basis = moment_dual_basis(k).unwrap();
            for (j, s) in basis.s.iter().enumerate() {
                assert_abs_diff_eq!(s.eval(-0.5), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(s.eval(0.5), 0.0, epsilon = 1e-12);
                for m in 0..k {
                    let expected = if m == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(basis.moment_of(m, s), expected, epsilon = 1e-11);
                }
            }
            for m in 0..k {
                assert_abs_diff_eq!(basis.moment_of(m, &basis.r_l), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(basis.moment_of(m, &basis.r_r), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_moments_alternate() {
        let basis = moment_dual_basis(4).unwrap();
        let c = basis.constant_moments();
        for (k, v) in c.iter().enumerate() {
            let expected = if k % 2 == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn partition_of_unity() {
        for k in 1..=5 {
            let basis = moment_dual_basis(k).unwrap();
            let c = basis.constant_moments();
            let p = basis.reconstruct(1.0, &c, 1.0);
            for i in 0..50 {
                let xi = -0.5 + i as f64 / 49.0;
                assert!((p.eval(xi) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gauss_rules() {
        let r1 = gauss_legendre_rule(1);
        assert_eq!(r1.nodes, vec![0.0]);
        assert_eq!(r1.weights, vec![1.0]);
        let r2 = gauss_legendre_rule(2);
        assert_abs_diff_eq!(r2.nodes[1], 1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-16);
        assert_abs_diff_eq!(r2.nodes[0], -1.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-16);
        assert_abs_diff_eq!(r2.weights[0], 0.5, epsilon = 1e-15);
        let r3 = gauss_legendre_rule(3);
        assert_abs_diff_eq!(r3.integrate(|x| x.powi(4)), 1.0 / 80.0, epsilon = 1e-15);
    }

    #[test]
    fn gauss_rules_exactness() {
        for n in 1..=16 {
            let rule = gauss_legendre_rule(n);
            let total: f64 = rule.weights.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
            for m in 0..=rule.exactness_degree {
                let approx = rule.integrate(|x| x.powi(m as i32));
                assert!(
                    (approx - monomial_integral(m)).abs() <= 1e-14,
                    "n = {n}, m = {m}: {approx} vs {}",
                    monomial_integral(m)
                );
            }
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let f = Poly::new(vec![0.3, -1.0, 2.0, 0.7]);
        for kind in [ProjectionKind::L2, ProjectionKind::GaussRadauLeft, ProjectionKind::GaussRadauRight] {
            let p = project(|x| f.eval(x), 3, kind).unwrap();
            assert_poly_eq(&p, &f, 1e-13);
        }
    }

    #[test]
    fn gauss_radau_conditions() {
        for k in 1..=4 {
            let f = |x: f64| x.powi(k as i32 + 1) + (3.0 * x).sin();
            let right = project(f, k, ProjectionKind::GaussRadauRight).unwrap();
            assert_abs_diff_eq!(right.eval(0.5), f(0.5), epsilon = 1e-13);
            let left = project(f, k, ProjectionKind::GaussRadauLeft).unwrap();
            assert_abs_diff_eq!(left.eval(-0.5), f(-0.5), epsilon = 1e-13);
            let rule = gauss_legendre_rule(16);
            for m in 0..k {
                for p in [&right, &left] {
                    let r = rule.integrate(|x| x.powi(m as i32) * (f(x) - p.eval(x)));
                    assert!(r.abs() <= 1e-12);
                }
            }
        }
        assert!(project(|x| x, 0, ProjectionKind::GaussRadauRight).is_err());
    }

    #[test]
    fn l2_projection_of_sine() {
        let p = project(f64::sin, 2, ProjectionKind::L2).unwrap();
        // oracle: Gram matrix of monomials against a 30-point rule
        let rule = gauss_legendre_rule(30);
        let gram = DMatrix::from_fn(3, 3, |i, j| monomial_integral(i + j));
        let rhs = DVector::from_fn(3, |i, _| rule.integrate(|x| x.powi(i as i32) * x.sin()));
        let c = solve_dense(gram, rhs).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(p.coeffs()[i], c[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn radau_projection_integrates_2k_polynomials() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for k in 1..=4 {
            for _ in 0..10 {
                let f = Poly::new((0..=2 * k).map(|_| rng.gen_range(-1.0..1.0)).collect());
                for kind in [ProjectionKind::GaussRadauLeft, ProjectionKind::GaussRadauRight] {
                    let p = project(|x| f.eval(x), k, kind).unwrap();
                    // the projection keeps the mean; the interpolatory rule on the
                    // Radau points integrates degree 2K exactly
                    let side = match kind {
                        ProjectionKind::GaussRadauLeft => RadauSide::Right,
                        _ => RadauSide::Left,
                    };
                    let pts = radau_points(k, side).unwrap();
                    let quad: f64 = pts
                        .iter()
                        .enumerate()
                        .map(|(r, &xr)| {
                            let mut l = Poly::constant(1.0);
                            for (s, &xs) in pts.iter().enumerate() {
                                if s != r {
                                    l = (&l * &Poly::new(vec![-xs, 1.0])).scale(1.0 / (xr - xs));
                                }
                            }
                            l.integral() * f.eval(xr)
                        })
                        .sum();
                    assert!((quad - f.integral()).abs() <= 1e-12, "k = {k}");
                    assert!((p.integral() - f.integral()).abs() <= 1e-12, "k = {k}");
                }
            }
        }
    }

    #[test]
    fn derivative_scaling() {
        let (r_l, _) = radau_pair(1).unwrap();
        assert_eq!(eval_and_derivative(&r_l, 0.5, 1.0), (0.0, 2.0));
        assert_eq!(eval_and_derivative(&r_l, -0.5, 1.0), (1.0, -4.0));
        let (_, d1) = eval_and_derivative(&r_l, 0.1, 1.0);
        let (_, d2) = eval_and_derivative(&r_l, 0.1, 2.0);
        assert_abs_diff_eq!(d2, 0.5 * d1, epsilon = 1e-16);
    }

    #[test]
    fn deflate_divides() {
        let (r_l, _) = radau_pair(3).unwrap();
        let q = r_l.deflate(0.5);
        let back = &q * &Poly::new(vec![-0.5, 1.0]);
        assert_poly_eq(&back, &r_l, 1e-13);
    }
}
