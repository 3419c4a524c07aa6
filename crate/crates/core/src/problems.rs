//! Conservation laws `∂_t q + ∂_x f(q) = 0` and two-point numerical fluxes.
//!
//! Small dense matrices (`m ≤ 2` in the catalog) are stored row-major in a
//! [`Mat`].

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Row-major `m × m` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub m: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(m: usize) -> Self {
        Self { m, a: vec![0.0; m * m] }
    }

    pub fn scalar(v: f64) -> Self {
        Self { m: 1, a: vec![v] }
    }

    pub fn identity(m: usize) -> Self {
        let mut r = Self::zeros(m);
        for i in 0..m {
            r.a[i * m + i] = 1.0;
        }
        r
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.m {
            out[i] = (0..self.m).map(|j| self.a[i * self.m + j] * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.apply(x, &mut out);
        out
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { m: self.m, a: self.a.iter().map(|v| v * s).collect() }
    }

    pub fn add_scaled(&self, s: f64, other: &Mat) -> Mat {
        Mat { m: self.m, a: self.a.iter().zip(&other.a).map(|(x, y)| x + s * y).collect() }
    }

    pub fn inverse(&self) -> Result<Mat> {
        let d = DMatrix::from_row_slice(self.m, self.m, &self.a);
        let inv = d
            .try_inverse()
            .ok_or_else(|| Error::Singular("flux Jacobian is not invertible".into()))?;
        let mut out = Mat::zeros(self.m);
        for i in 0..self.m {
            for j in 0..self.m {
                out.a[i * self.m + j] = inv[(i, j)];
            }
        }
        Ok(out)
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.m, &self.a)
    }

    fn from_dmatrix(d: &DMatrix<f64>) -> Mat {
        let m = d.nrows();
        let mut out = Mat::zeros(m);
        for i in 0..m {
            for j in 0..m {
                out.a[i * m + j] = d[(i, j)];
            }
        }
        out
    }
}

/// The built-in conservation laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Problem {
    /// `f(q) = U q`
    Advection1d { u: f64 },
    /// `∂_t q + U^x ∂_x q + U^y ∂_y q = 0`. One-dimensional queries use `U^x`.
    Advection2d { ux: f64, uy: f64 },
    /// `f(q) = q²/2`, inverted on the branch `q > 0`.
    Burgers,
    /// `f(q) = e^q`
    ExpFlux,
    /// Linear 2×2 system with `J = [[0, c], [c, 0]]`.
    Acoustics { c: f64 },
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Advection1d { .. } => "advection1d",
            Problem::Advection2d { .. } => "advection2d",
            Problem::Burgers => "burgers",
            Problem::ExpFlux => "expflux",
            Problem::Acoustics { .. } => "acoustics2x2",
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            Problem::Acoustics { .. } => 2,
            _ => 1,
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, Problem::Burgers | Problem::ExpFlux)
    }

    pub fn is_scalar(&self) -> bool {
        self.n_components() == 1
    }

    /// Scalar flux; for systems this is the first component of `f(q, 0)`.
    pub fn f(&self, q: f64) -> f64 {
        match *self {
            Problem::Advection1d { u } => u * q,
            Problem::Advection2d { ux, .. } => ux * q,
            Problem::Burgers => 0.5 * q * q,
            Problem::ExpFlux => q.exp(),
            Problem::Acoustics { .. } => 0.0,
        }
    }

    /// Scalar `f'(q)`.
    pub fn df(&self, q: f64) -> f64 {
        match *self {
            Problem::Advection1d { u } => u,
            Problem::Advection2d { ux, .. } => ux,
            Problem::Burgers => q,
            Problem::ExpFlux => q.exp(),
            Problem::Acoustics { .. } => 0.0,
        }
    }

    /// Scalar `f''(q)`.
    pub fn d2f(&self, q: f64) -> f64 {
        match *self {
            Problem::Burgers => 1.0,
            Problem::ExpFlux => q.exp(),
            _ => 0.0,
        }
    }

    pub fn flux(&self, q: &[f64], out: &mut [f64]) {
        match *self {
            Problem::Acoustics { c } => {
                out[0] = c * q[1];
                out[1] = c * q[0];
            }
            _ => out[0] = self.f(q[0]),
        }
    }

    pub fn jacobian(&self, q: &[f64]) -> Mat {
        match *self {
            Problem::Acoustics { c } => Mat { m: 2, a: vec![0.0, c, c, 0.0] },
            _ => Mat::scalar(self.df(q[0])),
        }
    }

    /// `(J⁺, J⁻)` by the sign of the eigenvalues of `J(q)`.
    pub fn split(&self, q: &[f64]) -> (Mat, Mat) {
        let j = self.jacobian(q);
        if j.m == 1 {
            let v = j.a[0];
            return (Mat::scalar(v.max(0.0)), Mat::scalar(v.min(0.0)));
        }
        eigen_split(&j)
    }

    /// Largest `|λ(J(q))|`.
    pub fn max_wave_speed(&self, q: &[f64]) -> f64 {
        match *self {
            Problem::Acoustics { c } => c.abs(),
            _ => self.df(q[0]).abs(),
        }
    }

    /// `f⁻¹(y)` on the declared branch.
    pub fn flux_inverse(&self, y: f64) -> Result<f64> {
        let fail = || Error::NotInvertible { problem: self.name(), value: y };
        match *self {
            Problem::Advection1d { u } | Problem::Advection2d { ux: u, .. } => {
                if u == 0.0 {
                    Err(fail())
                } else {
                    Ok(y / u)
                }
            }
            Problem::Burgers => {
                if y > 0.0 && y.is_finite() {
                    Ok((2.0 * y).sqrt())
                } else {
                    Err(fail())
                }
            }
            Problem::ExpFlux => {
                if y > 0.0 && y.is_finite() {
                    Ok(y.ln())
                } else {
                    Err(fail())
                }
            }
            Problem::Acoustics { .. } => Err(fail()),
        }
    }
}

/// Eigenvalue split of a symmetric matrix, eigenvalues clipped at zero.
pub fn eigen_split(j: &Mat) -> (Mat, Mat) {
    let eig = SymmetricEigen::new(j.to_dmatrix());
    let v = &eig.eigenvectors;
    let pos = eig.eigenvalues.map(|l| l.max(0.0));
    let neg = eig.eigenvalues.map(|l| l.min(0.0));
    let jp = v * DMatrix::from_diagonal(&pos) * v.transpose();
    let jm = v * DMatrix::from_diagonal(&neg) * v.transpose();
    (Mat::from_dmatrix(&jp), Mat::from_dmatrix(&jm))
}

/// Two-point numerical fluxes `f̂(q_L, q_R)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NumericalFlux {
    Upwind,
    Central,
    /// `α⁺ f(q_L) + α⁻ f(q_R)`, consistent when `α⁺ + α⁻ = 1`.
    AlphaWeighted { plus: f64, minus: f64 },
    /// Global Lax–Friedrichs with constant `a`.
    LaxFriedrichs { a: f64 },
}

impl NumericalFlux {
    pub fn alpha(plus: f64) -> Self {
        NumericalFlux::AlphaWeighted { plus, minus: 1.0 - plus }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NumericalFlux::AlphaWeighted { plus, minus } if (plus + minus - 1.0).abs() > 1e-14 => {
                Err(Error::Config(format!("alpha weights {plus} + {minus} must sum to 1")))
            }
            NumericalFlux::LaxFriedrichs { a } if a.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) => {
                Err(Error::Config(format!("Lax-Friedrichs constant must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            NumericalFlux::Upwind => "upwind".into(),
            NumericalFlux::Central => "central".into(),
            NumericalFlux::AlphaWeighted { plus, minus } => format!("alpha({plus},{minus})"),
            NumericalFlux::LaxFriedrichs { a } => format!("lf({a})"),
        }
    }

    /// For linear problems, `f̂ = W_L q_L + W_R q_R`.
    pub fn linear_weights(&self, problem: &Problem) -> Option<(Mat, Mat)> {
        if !problem.is_linear() {
            return None;
        }
        let zero = vec![0.0; problem.n_components()];
        Some(self.partials(problem, &zero, &zero))
    }

    pub fn value(&self, problem: &Problem, ql: &[f64], qr: &[f64], out: &mut [f64]) {
        let m = problem.n_components();
        if problem.is_linear() {
            let (wl, wr) = self.partials(problem, ql, qr);
            for i in 0..m {
                let mut l = 0.0;
                let mut r = 0.0;
                for j in 0..m {
                    l += wl.get(i, j) * ql[j];
                    r += wr.get(i, j) * qr[j];
                }
                out[i] = l + r;
            }
            return;
        }
        // nonlinear scalar problems
        let (l, r) = (ql[0], qr[0]);
        out[0] = match *self {
            NumericalFlux::Upwind => {
                let s = problem.df(0.5 * (l + r)).abs();
                0.5 * (problem.f(l) + problem.f(r)) - 0.5 * s * (r - l)
            }
            NumericalFlux::Central => 0.5 * problem.f(l) + 0.5 * problem.f(r),
            NumericalFlux::AlphaWeighted { plus, minus } => plus * problem.f(l) + minus * problem.f(r),
            NumericalFlux::LaxFriedrichs { a } => 0.5 * (problem.f(l) + problem.f(r)) - 0.5 * a * (r - l),
        };
    }

    pub fn value_scalar(&self, problem: &Problem, ql: f64, qr: f64) -> f64 {
        let mut out = [0.0];
        self.value(problem, &[ql], &[qr], &mut out);
        out[0]
    }

    /// `(∂f̂/∂q_L, ∂f̂/∂q_R)` at `(q_L, q_R)`.
    pub fn partials(&self, problem: &Problem, ql: &[f64], qr: &[f64]) -> (Mat, Mat) {
        let m = problem.n_components();
        match *self {
            NumericalFlux::Upwind => {
                if problem.is_linear() {
                    problem.split(ql)
                } else {
                    let (l, r) = (ql[0], qr[0]);
                    let mean = 0.5 * (l + r);
                    let s = problem.df(mean);
                    let ds = s.signum() * problem.d2f(mean) * 0.5;
                    let jump = r - l;
                    (
                        Mat::scalar(0.5 * problem.df(l) + 0.5 * s.abs() - 0.5 * ds * jump),
                        Mat::scalar(0.5 * problem.df(r) - 0.5 * s.abs() - 0.5 * ds * jump),
                    )
                }
            }
            NumericalFlux::Central => (problem.jacobian(ql).scale(0.5), problem.jacobian(qr).scale(0.5)),
            NumericalFlux::AlphaWeighted { plus, minus } => {
                (problem.jacobian(ql).scale(plus), problem.jacobian(qr).scale(minus))
            }
            NumericalFlux::LaxFriedrichs { a } => {
                let id = Mat::identity(m);
                (
                    problem.jacobian(ql).add_scaled(a, &id).scale(0.5),
                    problem.jacobian(qr).add_scaled(-a, &id).scale(0.5),
                )
            }
        }
    }

    /// Scalar weights `(α⁺, α⁻)` with `f̂ = U(α⁺ q_L + α⁻ q_R)` for scalar linear
    /// problems with `U ≠ 0`.
    pub fn alpha_pair(&self, problem: &Problem) -> Option<(f64, f64)> {
        if !problem.is_linear() || !problem.is_scalar() {
            return None;
        }
        let u = problem.df(0.0);
        if u == 0.0 {
            return None;
        }
        let (wl, wr) = self.linear_weights(problem)?;
        Some((wl.a[0] / u, wr.a[0] / u))
    }
}

/// `a = 1.1 · max |λ|` over the given states.
pub fn lax_friedrichs_constant(problem: &Problem, states: impl IntoIterator<Item = f64>) -> f64 {
    let max = states
        .into_iter()
        .map(|q| problem.max_wave_speed(&[q]))
        .fold(0.0f64, f64::max);
    1.1 * max
}

/// `f⁻¹(f̂)`; named for symmetry with the nonlinear dof identification.
pub fn invert_flux(problem: &Problem, fhat: f64) -> Result<f64> {
    problem.flux_inverse(fhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_split() {
        let (p, m) = Problem::Advection1d { u: 2.0 }.split(&[0.3]);
        assert_eq!((p.a[0], m.a[0]), (2.0, 0.0));
        let (p, m) = Problem::Advection1d { u: -1.5 }.split(&[0.3]);
        assert_eq!((p.a[0], m.a[0]), (0.0, -1.5));
    }

    #[test]
    fn acoustics_split() {
        let (p, m) = Problem::Acoustics { c: 1.0 }.split(&[0.0, 0.0]);
        let expected_p = [0.5, 0.5, 0.5, 0.5];
        let expected_m = [-0.5, 0.5, 0.5, -0.5];
        for i in 0..4 {
            assert_abs_diff_eq!(p.a[i], expected_p[i], epsilon = 1e-14);
            assert_abs_diff_eq!(m.a[i], expected_m[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn split_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let problems = [
            Problem::Advection1d { u: 0.7 },
            Problem::Advection1d { u: -1.3 },
            Problem::Burgers,
            Problem::ExpFlux,
            Problem::Acoustics { c: 1.7 },
        ];
        for problem in problems {
            for _ in 0..1000 {
                let q: Vec<f64> = (0..problem.n_components()).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let (p, m) = problem.split(&q);
                let j = problem.jacobian(&q);
                for i in 0..j.a.len() {
                    assert!((p.a[i] + m.a[i] - j.a[i]).abs() <= 1e-12);
                }
                if j.m == 1 {
                    assert!(p.a[0] >= 0.0 && m.a[0] <= 0.0);
                } else {
                    let ep = SymmetricEigen::new(p.to_dmatrix()).eigenvalues;
                    let em = SymmetricEigen::new(m.to_dmatrix()).eigenvalues;
                    assert!(ep.iter().all(|&l| l >= -1e-12));
                    assert!(em.iter().all(|&l| l <= 1e-12));
                }
            }
        }
    }

    #[test]
    fn flux_values() {
        let adv = Problem::Advection1d { u: 2.0 };
        assert_eq!(NumericalFlux::Upwind.value_scalar(&adv, 0.3, 0.9), 2.0 * 0.3);
        let lf = NumericalFlux::LaxFriedrichs { a: 2.0 };
        assert_abs_diff_eq!(lf.value_scalar(&Problem::Burgers, 1.0, 2.0), 0.25, epsilon = 1e-15);
        for flux in [NumericalFlux::Upwind, NumericalFlux::Central, NumericalFlux::alpha(0.7), lf] {
            for problem in [adv, Problem::Burgers, Problem::ExpFlux] {
                let q = 0.8;
                assert_abs_diff_eq!(flux.value_scalar(&problem, q, q), problem.f(q), epsilon = 1e-15);
            }
        }
        let ac = Problem::Acoustics { c: 1.0 };
        let mut out = [0.0; 2];
        NumericalFlux::Upwind.value(&ac, &[1.0, 2.0], &[1.0, 2.0], &mut out);
        assert_abs_diff_eq!(out[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn alpha_limits_are_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let adv = Problem::Advection1d { u: 1.37 };
        for _ in 0..1000 {
            let l: f64 = rng.gen_range(-5.0..5.0);
            let r: f64 = rng.gen_range(-5.0..5.0);
            let up = NumericalFlux::Upwind.value_scalar(&adv, l, r);
            let a10 = NumericalFlux::AlphaWeighted { plus: 1.0, minus: 0.0 }.value_scalar(&adv, l, r);
            assert_eq!(up.to_bits(), a10.to_bits());
            let c = NumericalFlux::Central.value_scalar(&adv, l, r);
            let a5 = NumericalFlux::AlphaWeighted { plus: 0.5, minus: 0.5 }.value_scalar(&adv, l, r);
            assert_eq!(c.to_bits(), a5.to_bits());
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fluxes = [
            NumericalFlux::Upwind,
            NumericalFlux::Central,
            NumericalFlux::alpha(0.3),
            NumericalFlux::LaxFriedrichs { a: 3.0 },
        ];
        for problem in [Problem::Burgers, Problem::ExpFlux, Problem::Advection1d { u: -0.4 }] {
            for flux in fluxes {
                for _ in 0..200 {
                    let l: f64 = rng.gen_range(0.5..2.0);
                    let r: f64 = rng.gen_range(0.5..2.0);
                    let h = 1e-6;
                    let fd_l = (flux.value_scalar(&problem, l + h, r) - flux.value_scalar(&problem, l - h, r)) / (2.0 * h);
                    let fd_r = (flux.value_scalar(&problem, l, r + h) - flux.value_scalar(&problem, l, r - h)) / (2.0 * h);
                    let (pl, pr) = flux.partials(&problem, &[l], &[r]);
                    let scale = 1.0 + fd_l.abs().max(fd_r.abs());
                    assert!((pl.a[0] - fd_l).abs() <= 1e-6 * scale, "{problem:?} {flux:?}");
                    assert!((pr.a[0] - fd_r).abs() <= 1e-6 * scale, "{problem:?} {flux:?}");
                }
            }
        }
    }

    #[test]
    fn inverses() {
        assert_eq!(invert_flux(&Problem::ExpFlux, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(invert_flux(&Problem::Burgers, 2.0).unwrap(), 2.0, epsilon = 1e-15);
        assert!(matches!(invert_flux(&Problem::Burgers, -0.1), Err(Error::NotInvertible { .. })));
        for q in [0.5, 1.0, 1.7] {
            assert_abs_diff_eq!(Problem::Burgers.flux_inverse(Problem::Burgers.f(q)).unwrap(), q, epsilon = 1e-14);
            assert_abs_diff_eq!(Problem::ExpFlux.flux_inverse(Problem::ExpFlux.f(q)).unwrap(), q, epsilon = 1e-14);
        }
    }

    #[test]
    fn weights_and_validation() {
        assert!(NumericalFlux::AlphaWeighted { plus: 0.7, minus: 0.4 }.validate().is_err());
        assert!(NumericalFlux::LaxFriedrichs { a: 0.0 }.validate().is_err());
        let adv = Problem::Advection1d { u: -2.0 };
        assert_eq!(NumericalFlux::Upwind.alpha_pair(&adv), Some((0.0, 1.0)));
        let lf = NumericalFlux::LaxFriedrichs { a: 4.0 };
        let (ap, am) = lf.alpha_pair(&adv).unwrap();
        assert_abs_diff_eq!(ap, 0.5 * (-2.0 + 4.0) / -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ap + am, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lax_friedrichs_constant(&Problem::Burgers, [0.5, -2.0, 1.0]), 2.2, epsilon = 1e-15);
    }
}
