//! Strong-stability-preserving Runge–Kutta schemes in Shu–Osher form and
//! CFL-based step sizes.

use crate::error::{Error, Result};
use crate::mesh::{method_entry, MethodFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RkScheme {
    /// Three stages, third order.
    Ssprk33,
    /// Five stages, fourth order.
    Ssprk54,
}

// Five-stage fourth-order SSP coefficients (Spiteri & Ruuth).
const A21: f64 = 0.391752226571890;
const A30: f64 = 0.444370493651235;
const A32: f64 = 0.555629506348765;
const B32: f64 = 0.368410593050371;
const A40: f64 = 0.620101851488403;
const A43: f64 = 0.379898148511597;
const B43: f64 = 0.251891774271694;
const A50: f64 = 0.178079954393132;
const A54: f64 = 0.821920045606868;
const B54: f64 = 0.544974750228521;
const F2: f64 = 0.517231671970585;
const F3: f64 = 0.096059710526147;
const G3: f64 = 0.063692468666290;
const F4: f64 = 0.386708617503269;
const G4: f64 = 0.226007483236906;

impl RkScheme {
    pub fn name(&self) -> &'static str {
        match self {
            RkScheme::Ssprk33 => "ssprk33",
            RkScheme::Ssprk54 => "ssprk54",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssprk33" | "ssprk3" | "rk3" | "33" => Ok(RkScheme::Ssprk33),
            "ssprk54" | "rk4" | "54" => Ok(RkScheme::Ssprk54),
            other => Err(Error::Config(format!("unknown Runge-Kutta scheme '{other}'"))),
        }
    }

    pub fn stages(&self) -> usize {
        match self {
            RkScheme::Ssprk33 => 3,
            RkScheme::Ssprk54 => 5,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            RkScheme::Ssprk33 => 3,
            RkScheme::Ssprk54 => 4,
        }
    }
}

/// Scratch storage for [`rk_step`], reused across steps.
#[derive(Clone, Debug, Default)]
pub struct RkWorkspace {
    stages: Vec<Vec<f64>>,
    k: Vec<f64>,
}

impl RkWorkspace {
    fn ensure(&mut self, n: usize, count: usize) {
        self.stages.resize_with(count, Vec::new);
        for s in &mut self.stages {
            s.resize(n, 0.0);
        }
        self.k.resize(n, 0.0);
    }
}

/// Advances `u` from `t` to `t + dt` in place.
pub fn rk_step<F>(scheme: RkScheme, rhs: &mut F, t: f64, u: &mut [f64], dt: f64, ws: &mut RkWorkspace) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = u.len();
    match scheme {
        RkScheme::Ssprk33 => {
            ws.ensure(n, 2);
            let (s, k) = (&mut ws.stages, &mut ws.k);
            rhs(t, u, k)?;
            for i in 0..n {
                s[0][i] = u[i] + dt * k[i];
            }
            rhs(t + dt, &s[0], k)?;
            for i in 0..n {
                s[1][i] = 0.75 * u[i] + 0.25 * (s[0][i] + dt * k[i]);
            }
            rhs(t + 0.5 * dt, &s[1], k)?;
            for i in 0..n {
                u[i] = u[i] / 3.0 + 2.0 / 3.0 * (s[1][i] + dt * k[i]);
            }
        }
        RkScheme::Ssprk54 => {
            ws.ensure(n, 4);
            let c2 = A21;
            let c3 = A32 * c2 + B32;
            let c4 = A43 * c3 + B43;
            let c5 = A54 * c4 + B54;
            let (s, k) = (&mut ws.stages, &mut ws.k);
            rhs(t, u, k)?;
            for i in 0..n {
                s[0][i] = u[i] + A21 * dt * k[i];
            }
            rhs(t + c2 * dt, &s[0], k)?;
            for i in 0..n {
                s[1][i] = A30 * u[i] + A32 * s[0][i] + B32 * dt * k[i];
            }
            rhs(t + c3 * dt, &s[1], k)?;
            for i in 0..n {
                s[2][i] = A40 * u[i] + A43 * s[1][i] + B43 * dt * k[i];
            }
            // u5 needs L(u3) and L(u4); keep L(u3) in stage slot 0 (u1 is no longer needed)
            rhs(t + c4 * dt, &s[2], k)?;
            for i in 0..n {
                s[3][i] = A50 * u[i] + A54 * s[2][i] + B54 * dt * k[i];
                s[0][i] = k[i];
            }
            rhs(t + c5 * dt, &s[3], k)?;
            for i in 0..n {
                u[i] = F2 * s[1][i] + F3 * s[2][i] + G3 * dt * s[0][i] + F4 * s[3][i] + G4 * dt * k[i];
            }
        }
    }
    Ok(())
}

/// Integrates from `t0` to `t_final` with step `dt`, clipping the last step.
/// Returns the number of steps; aborts on non-finite values.
pub fn integrate<F>(scheme: RkScheme, mut rhs: F, u: &mut [f64], t0: f64, t_final: f64, dt: f64) -> Result<usize>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(dt > 0.0) || !(t_final >= t0) {
        return Err(Error::Config(format!("invalid time stepping: dt = {dt}, interval [{t0}, {t_final}]")));
    }
    let n_steps = step_count(t_final - t0, dt);
    let mut ws = RkWorkspace::default();
    let mut t = t0;
    for step in 0..n_steps {
        let h = if step + 1 == n_steps { t_final - t } else { dt };
        rk_step(scheme, &mut rhs, t, u, h, &mut ws)?;
        t = if step + 1 == n_steps { t_final } else { t + h };
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable { step: step + 1, time: t });
        }
    }
    Ok(n_steps)
}

/// `ceil(T / Δt)`, tolerant to roundoff in the ratio.
pub fn step_count(duration: f64, dt: f64) -> usize {
    if duration <= 0.0 {
        return 0;
    }
    let r = duration / dt;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * r.max(1.0) {
        n.max(1.0) as usize
    } else {
        r.ceil() as usize
    }
}

/// `Δt = C_CFL Δx` with the catalog CFL number of the method unless overridden.
pub fn dt_from_cfl(family: MethodFamily, order: usize, dx: f64, cfl_override: Option<f64>) -> Result<f64> {
    let cfl = match cfl_override {
        Some(c) if c > 0.0 => c,
        Some(c) => return Err(Error::Config(format!("CFL override must be positive, got {c}"))),
        None => {
            method_entry(family, order)
                .ok_or_else(|| Error::Config(format!("no catalog CFL number for {family:?} order {order}")))?
                .cfl
        }
    };
    Ok(cfl * dx)
}
