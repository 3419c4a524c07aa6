//! Polynomials in two reference coordinates `(ξ, η) ∈ [-1/2, 1/2]²`, stored as
//! a dense monomial tensor `c[a][b] ξ^a η^b`.

use crate::poly::{monomial_integral, Poly};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly2 {
    nx: usize,
    ny: usize,
    coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn zero(deg_x: usize, deg_y: usize) -> Self {
        Self { nx: deg_x + 1, ny: deg_y + 1, coeffs: vec![0.0; (deg_x + 1) * (deg_y + 1)] }
    }

    /// `p(ξ)·q(η)`
    pub fn outer(p: &Poly, q: &Poly) -> Self {
        let (nx, ny) = (p.coeffs().len(), q.coeffs().len());
        let mut coeffs = vec![0.0; nx * ny];
        for (a, &pa) in p.coeffs().iter().enumerate() {
            for (b, &qb) in q.coeffs().iter().enumerate() {
                coeffs[a * ny + b] = pa * qb;
            }
        }
        Self { nx, ny, coeffs }
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a < self.nx && b < self.ny {
            self.coeffs[a * self.ny + b]
        } else {
            0.0
        }
    }

    pub fn add_scaled(&self, s: f64, other: &Poly2) -> Poly2 {
        let nx = self.nx.max(other.nx);
        let ny = self.ny.max(other.ny);
        let mut coeffs = vec![0.0; nx * ny];
        for a in 0..nx {
            for b in 0..ny {
                coeffs[a * ny + b] = self.coeff(a, b) + s * other.coeff(a, b);
            }
        }
        Poly2 { nx, ny, coeffs }
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        let mut acc = 0.0;
        for a in (0..self.nx).rev() {
            let mut row = 0.0;
            for b in (0..self.ny).rev() {
                row = row * eta + self.coeffs[a * self.ny + b];
            }
            acc = acc * xi + row;
        }
        acc
    }

    pub fn d_xi(&self) -> Poly2 {
        if self.nx == 1 {
            return Poly2::zero(0, self.ny - 1);
        }
        let mut out = Poly2::zero(self.nx - 2, self.ny - 1);
        for a in 1..self.nx {
            for b in 0..self.ny {
                out.coeffs[(a - 1) * self.ny + b] = a as f64 * self.coeffs[a * self.ny + b];
            }
        }
        out
    }

    pub fn d_eta(&self) -> Poly2 {
        if self.ny == 1 {
            return Poly2::zero(self.nx - 1, 0);
        }
        let mut out = Poly2::zero(self.nx - 1, self.ny - 2);
        for a in 0..self.nx {
            for b in 1..self.ny {
                out.coeffs[a * (self.ny - 1) + b - 1] = b as f64 * self.coeffs[a * self.ny + b];
            }
        }
        out
    }

    /// Restriction to the line `ξ = xi`, as a polynomial in `η`.
    pub fn at_xi(&self, xi: f64) -> Poly {
        let c = (0..self.ny)
            .map(|b| (0..self.nx).rev().fold(0.0, |acc, a| acc * xi + self.coeffs[a * self.ny + b]))
            .collect();
        Poly::new(c)
    }

    /// Restriction to the line `η = eta`, as a polynomial in `ξ`.
    pub fn at_eta(&self, eta: f64) -> Poly {
        let c = (0..self.nx)
            .map(|a| (0..self.ny).rev().fold(0.0, |acc, b| acc * eta + self.coeffs[a * self.ny + b]))
            .collect();
        Poly::new(c)
    }

    /// Integral over the reference square.
    pub fn integral(&self) -> f64 {
        let mut s = 0.0;
        for a in (0..self.nx).step_by(2) {
            for b in (0..self.ny).step_by(2) {
                s += self.coeffs[a * self.ny + b] * monomial_integral(a) * monomial_integral(b);
            }
        }
        s
    }

    /// `∫∫ self · v(ξ) w(η)`
    pub fn inner_outer(&self, v: &Poly, w: &Poly) -> f64 {
        let mut s = 0.0;
        for a in 0..self.nx {
            let ia: f64 = v
                .coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| c * monomial_integral(a + k))
                .sum();
            if ia == 0.0 {
                continue;
            }
            for b in 0..self.ny {
                let c = self.coeffs[a * self.ny + b];
                if c == 0.0 {
                    continue;
                }
                let ib: f64 = w
                    .coeffs()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * monomial_integral(b + k))
                    .sum();
                s += c * ia * ib;
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn outer_product_evaluates() {
        let p = Poly::new(vec![1.0, 2.0]);
        let q = Poly::new(vec![0.5, 0.0, -3.0]);
        let t = Poly2::outer(&p, &q);
        for &(x, y) in &[(0.1, -0.3), (0.5, 0.5), (-0.5, 0.2)] {
            assert_abs_diff_eq!(t.eval(x, y), p.eval(x) * q.eval(y), epsilon = 1e-15);
            assert_abs_diff_eq!(t.d_xi().eval(x, y), 2.0 * q.eval(y), epsilon = 1e-15);
            assert_abs_diff_eq!(t.d_eta().eval(x, y), p.eval(x) * q.derivative().eval(y), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(t.integral(), p.integral() * q.integral(), epsilon = 1e-15);
        let r = t.at_xi(0.3);
        assert_abs_diff_eq!(r.eval(0.2), t.eval(0.3, 0.2), epsilon = 1e-15);
        let r = t.at_eta(-0.1);
        assert_abs_diff_eq!(r.eval(0.4), t.eval(0.4, -0.1), epsilon = 1e-15);
        let v = Poly::new(vec![0.0, 1.0]);
        let w = Poly::constant(1.0);
        assert_abs_diff_eq!(t.inner_outer(&v, &w), p.inner(&v) * q.integral(), epsilon = 1e-15);
    }
}
