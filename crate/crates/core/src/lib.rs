//! Semi-discrete Active Flux (AF) and Discontinuous Galerkin (DG) solvers on
//! Cartesian grids, a verifier for their equivalence under a mapping of the
//! degrees of freedom, and a harness for convergence and runtime studies.
//!
//! Module overview:
//!
//! * [`poly`]: Legendre and Radau polynomials, the AF dual basis, quadrature.
//! * [`mesh`]: grids, state layouts, dof counts.
//! * [`problems`]: fluxes, Jacobian splittings and numerical fluxes.
//! * [`dg`], [`af`]: the two right-hand sides.
//! * [`serendipity`]: 2-d AF with the reduced (serendipity-type) dof set.
//! * [`equiv`]: dof mappings, reconstructions and the equivalence verifier.
//! * [`timeint`]: SSP Runge–Kutta schemes.
//! * [`experiments`]: run configurations, error norms, CSV output.

pub mod af;
pub mod dg;
pub mod equiv;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod poly;
pub mod poly2;
pub mod problems;
pub mod serendipity;
pub mod timeint;

pub use error::{Error, Result};

/// Exact boundary data for Dirichlet runs. Only scalar problems are supported.
pub trait BoundaryData: Sync {
    fn value(&self, t: f64, x: f64, y: f64) -> f64;
    fn time_derivative(&self, t: f64, x: f64, y: f64) -> f64;
}

/// Boundary treatment of a run.
#[derive(Clone, Copy, Default)]
pub enum Boundary<'a> {
    #[default]
    Periodic,
    Dirichlet(&'a dyn BoundaryData),
}

impl Boundary<'_> {
    pub fn is_periodic(&self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

impl std::fmt::Debug for Boundary<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Periodic => write!(f, "Periodic"),
            Boundary::Dirichlet(_) => write!(f, "Dirichlet"),
        }
    }
}
