//! Dof mappings from DG to Active Flux, the Radau augmentations that turn a DG
//! solution into the AF reconstruction, and a verifier that compares the
//! DG-induced time derivatives of the mapped dofs with the AF right-hand side.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::af::{Af1d, Af2d, FluxData, PointUpdate};
use crate::dg::{riesz_endpoint_functionals, Dg1d, Dg2d};
use crate::error::{Error, Result};
use crate::mesh::{simpson_average, simpson_midpoint, Af1dLayout, Af2dLayout, Af2dVariant, DgState1D, DgState2D, Grid1D, Grid2D};
use crate::poly::{gauss_legendre_rule, radau_pair, AfBasis, Poly, PROJECTION_POINTS};
use crate::poly2::Poly2;
use crate::problems::{lax_friedrichs_constant, NumericalFlux, Problem};
use crate::Boundary;

/// One row of an [`EquivalenceReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyReport {
    pub family: String,
    pub max_abs: f64,
    pub scale: f64,
    pub relative: f64,
    pub tolerance: f64,
    /// Negative controls pass when the mismatch is at least `tolerance`.
    pub must_differ: bool,
}

impl FamilyReport {
    pub fn new(family: impl Into<String>, max_abs: f64, scale: f64, tolerance: f64) -> Self {
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        Self { family: family.into(), max_abs, scale, relative: max_abs / scale, tolerance, must_differ: false }
    }

    pub fn must_differ(mut self) -> Self {
        self.must_differ = true;
        self
    }

    pub fn pass(&self) -> bool {
        if self.must_differ {
            self.relative >= self.tolerance
        } else {
            self.relative <= self.tolerance
        }
    }
}

/// Per-family comparison of DG-induced and AF-native dof derivatives.
#[derive(Clone, Debug, Default)]
pub struct EquivalenceReport {
    pub label: String,
    pub seed: u64,
    pub flags: Vec<String>,
    pub families: Vec<FamilyReport>,
}

impl EquivalenceReport {
    pub fn pass(&self) -> bool {
        self.families.iter().all(FamilyReport::pass)
    }

    pub fn worst_relative(&self) -> f64 {
        self.families.iter().filter(|f| !f.must_differ).map(|f| f.relative).fold(0.0, f64::max)
    }

    /// `family,max_abs,scale,relative,pass` with `#` metadata lines.
    pub fn write_csv(&self, mut w: impl Write, header: bool) -> Result<()> {
        writeln!(w, "# setting: {}", self.label)?;
        writeln!(w, "# seed: {}", self.seed)?;
        for f in &self.flags {
            writeln!(w, "# flag: {f}")?;
        }
        if header {
            writeln!(w, "family,max_abs,scale,relative,pass")?;
        }
        for f in &self.families {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e},{}", f.family, f.max_abs, f.scale, f.relative, f.pass())?;
        }
        Ok(())
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `T[k][n] = A_k ∫ b_k φ_n dξ`: DG modal coefficients to AF moments.
pub fn moment_transfer(k: usize) -> Result<Vec<Vec<f64>>> {
    let dg = crate::dg::DgBasis::new(k);
    Ok((0..k)
        .map(|kk| {
            let b = AfBasis::moment_weight(kk);
            dg.phi.iter().map(|phi| (kk + 1) as f64 * b.inner(phi)).collect()
        })
        .collect())
}

/// AF point-update variant that corresponds to a numerical flux.
pub fn point_update_for(flux: &NumericalFlux, problem: &Problem) -> Result<PointUpdate> {
    Ok(match *flux {
        NumericalFlux::Upwind if problem.is_linear() => PointUpdate::JacobianSplitting,
        NumericalFlux::Central if problem.is_linear() => PointUpdate::Central,
        NumericalFlux::AlphaWeighted { plus, minus } if problem.is_linear() => PointUpdate::AlphaWeighted { plus, minus },
        NumericalFlux::LaxFriedrichs { a } if problem.is_linear() => PointUpdate::FluxVectorSplitting { a },
        _ if problem.is_scalar() => PointUpdate::DgInspired { flux: *flux },
        _ => return Err(Error::Unsupported(format!("no AF point update for {} on {}", flux.name(), problem.name()))),
    })
}

/// `Q_{i+1/2}`: `q̂` for linear problems, `f⁻¹(f̂)` for nonlinear ones.
fn interface_value(dg: &Dg1d, u: &[f64], p: usize) -> Result<Vec<f64>> {
    let (l, r) = dg.interface_states(0.0, u, p, Boundary::Periodic)?;
    let problem = &dg.problem;
    if let Some((ap, am)) = dg.flux.alpha_pair(problem) {
        return Ok(vec![ap * l[0] + am * r[0]]);
    }
    let m = problem.n_components();
    let mut fhat = vec![0.0; m];
    dg.flux.value(problem, &l, &r, &mut fhat);
    if problem.is_linear() {
        let jinv = problem.jacobian(&vec![0.0; m]).inverse()?;
        Ok(jinv.mul_vec(&fhat))
    } else {
        Ok(vec![problem.flux_inverse(fhat[0])?])
    }
}

/// DG state to AF dofs (periodic grids, `K ≥ 1`).
pub fn map_dg_to_af_1d(dg: &Dg1d, u: &[f64]) -> Result<Vec<f64>> {
    let k = dg.basis.k;
    if k == 0 {
        return Err(Error::InvalidOrder("the DG/AF identification needs K >= 1".into()));
    }
    let m = dg.problem.n_components();
    let dl = dg.layout();
    let al = Af1dLayout::new(&dg.grid, k, m);
    let t = moment_transfer(k)?;
    let mut out = vec![0.0; al.len()];
    for p in 0..al.n_interfaces {
        let q = interface_value(dg, u, p)?;
        out[al.point(p, 0)..al.point(p, 0) + m].copy_from_slice(&q);
    }
    for i in 0..dl.n_cells {
        for kk in 0..k {
            for c in 0..m {
                out[al.moment(i, kk, c)] = (0..=k).map(|n| t[kk][n] * u[dl.index(i, n, c)]).sum();
            }
        }
    }
    Ok(out)
}

/// Radau-augmented DG polynomial `q_i + (Q_{i+1/2} − q_i⁺) R_R + (Q_{i−1/2} − q_i⁻) R_L`
/// of one component, with the interface values taken from the mapping.
pub fn augment_reconstruction_1d(dg: &Dg1d, u: &[f64], cell: usize, c: usize) -> Result<Poly> {
    let (r_l, r_r) = radau_pair(dg.basis.k)?;
    let (qm, qp) = dg.traces(u, cell);
    let left = interface_value(dg, u, dg.grid.left_interface(cell))?[c];
    let right = interface_value(dg, u, dg.grid.right_interface(cell))?[c];
    Ok(dg.cell_poly(u, cell, c).add_scaled(right - qp[c], &r_r).add_scaled(left - qm[c], &r_l))
}

/// Radau correction weights `(Q_{i−1/2} − q_i⁻, Q_{i+1/2} − q_i⁺)` of one cell.
pub fn radau_weights_1d(dg: &Dg1d, u: &[f64], cell: usize, c: usize) -> Result<(f64, f64)> {
    let (qm, qp) = dg.traces(u, cell);
    let left = interface_value(dg, u, dg.grid.left_interface(cell))?[c];
    let right = interface_value(dg, u, dg.grid.right_interface(cell))?[c];
    Ok((left - qm[c], right - qp[c]))
}

/// Projection `F_i ∈ P^{K+1}` of `f ∘ q_i` with endpoint values `f̂_{i∓1/2}`
/// and the moments of `f ∘ q_i` (computed with the DG volume rule).
pub fn project_flux_f(dg: &Dg1d, u: &[f64], cell: usize, fhat_left: f64, fhat_right: f64) -> Result<Poly> {
    let basis = crate::poly::moment_dual_basis(dg.basis.k)?;
    let phi = flux_moments(dg, u, cell);
    Ok(basis.reconstruct(fhat_left, &phi, fhat_right))
}

fn flux_moments(dg: &Dg1d, u: &[f64], cell: usize) -> Vec<f64> {
    let q = dg.cell_poly(u, cell, 0);
    (0..dg.basis.k)
        .map(|kk| {
            let b = AfBasis::moment_weight(kk);
            (kk + 1) as f64 * dg.rule.integrate(|x| b.eval(x) * dg.problem.f(q.eval(x)))
        })
        .collect()
}

/// Verifier options for one 1-d setting.
#[derive(Clone, Debug)]
pub struct Setting1d {
    pub problem: Problem,
    pub flux: NumericalFlux,
    pub k: usize,
    pub n_cells: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Evaluate the flux-projection point update without its leading minus sign.
    pub flip_point_sign: bool,
}

impl Setting1d {
    pub fn new(problem: Problem, flux: NumericalFlux, k: usize, n_cells: usize, seed: u64) -> Self {
        let tolerance = if problem.is_linear() { 1e-11 } else { 1e-10 };
        Self { problem, flux, k, n_cells, seed, tolerance, flip_point_sign: false }
    }

    pub fn label(&self) -> String {
        format!("1d {} flux={} K={} cells={}", self.problem.name(), self.flux.name(), self.k, self.n_cells)
    }
}

/// Seeded DG state: uniform random coefficients in `[-1, 1]` for linear
/// problems, the projection of a smooth positive function for nonlinear ones.
pub fn random_dg_state_1d(dg: &Dg1d, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if dg.problem.is_linear() {
        return (0..dg.layout().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    }
    let (t1, t2): (f64, f64) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
    let rule = gauss_legendre_rule(PROJECTION_POINTS);
    DgState1D::from_fn(&dg.grid, dg.basis.k, 1, &rule, |x| {
        vec![1.25 + 0.4 * (2.0 * PI * x + t1).sin() + 0.3 * (4.0 * PI * x + t2).cos()]
    })
    .data
}

/// Builds the DG operator of a 1-d setting; Lax–Friedrichs constants of zero
/// are replaced by `1.1 max |f'|` over the state.
pub fn dg_for_setting(setting: &Setting1d) -> Result<(Dg1d, Vec<f64>)> {
    let grid = Grid1D::unit_periodic(setting.n_cells);
    let rule = crate::mesh::rule_for_n_int(4 * setting.k + 6);
    let mut dg = Dg1d::new(grid, setting.k, setting.problem, NumericalFlux::Central, rule)?;
    let u = random_dg_state_1d(&dg, setting.seed);
    dg.flux = match setting.flux {
        NumericalFlux::LaxFriedrichs { a: 0.0 } => {
            let samples = (0..dg.grid.n_cells).flat_map(|i| {
                let q = dg.cell_poly(&u, i, 0);
                (0..=8).map(move |s| q.eval(-0.5 + s as f64 / 8.0))
            });
            let a = if setting.problem.is_linear() {
                1.1 * setting.problem.max_wave_speed(&vec![0.0; setting.problem.n_components()])
            } else {
                lax_friedrichs_constant(&setting.problem, samples.collect::<Vec<_>>())
            };
            NumericalFlux::LaxFriedrichs { a }
        }
        f => f,
    };
    dg.flux.validate()?;
    Ok((dg, u))
}

/// Compares the DG-induced derivatives of the mapped dofs with the AF rhs.
pub fn verify_equivalence_1d(setting: &Setting1d) -> Result<EquivalenceReport> {
    let (dg, u) = dg_for_setting(setting)?;
    verify_state_1d(&dg, &u, setting)
}

pub fn verify_state_1d(dg: &Dg1d, u: &[f64], setting: &Setting1d) -> Result<EquivalenceReport> {
    let k = dg.basis.k;
    let problem = dg.problem;
    let m = problem.n_components();
    let update = point_update_for(&dg.flux, &problem)?;
    let af = Af1d::new(dg.grid.clone(), k, problem, update, dg.rule.clone())?;
    let al = af.layout();
    let dl = dg.layout();
    let mapped = map_dg_to_af_1d(dg, u)?;

    // DG side
    let mut du = vec![0.0; u.len()];
    dg.rhs(0.0, u, &mut du, Boundary::Periodic)?;
    let t = moment_transfer(k)?;
    let (v_l, v_r) = riesz_endpoint_functionals(k)?;
    let mut induced = vec![0.0; al.len()];
    for i in 0..dl.n_cells {
        for kk in 0..k {
            for c in 0..m {
                induced[al.moment(i, kk, c)] = (0..=k).map(|n| t[kk][n] * du[dl.index(i, n, c)]).sum();
            }
        }
    }
    let mut partials = Vec::with_capacity(al.n_interfaces);
    for p in 0..al.n_interfaces {
        let (i, j) = (dg.grid.left_cell(p).unwrap(), dg.grid.right_cell(p).unwrap());
        let dq_left = dg.test_functional(0.0, u, i, &v_r, Boundary::Periodic)?;
        let dq_right = dg.test_functional(0.0, u, j, &v_l, Boundary::Periodic)?;
        let value: Vec<f64> = if let Some((ap, am)) = dg.flux.alpha_pair(&problem) {
            vec![ap * dq_left[0] + am * dq_right[0]]
        } else if problem.is_linear() {
            let (wl, wr) = dg.flux.linear_weights(&problem).expect("linear problem");
            let jinv = problem.jacobian(&vec![0.0; m]).inverse()?;
            let a = wl.mul_vec(&dq_left);
            let b = wr.mul_vec(&dq_right);
            jinv.mul_vec(&a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>())
        } else {
            let (ql, qr) = dg.interface_states(0.0, u, p, Boundary::Periodic)?;
            let (pl, pr) = dg.flux.partials(&problem, &ql, &qr);
            partials.push((pl.a[0], pr.a[0]));
            let a = problem.df(mapped[al.point(p, 0)]);
            vec![(pl.a[0] * dq_left[0] + pr.a[0] * dq_right[0]) / a]
        };
        induced[al.point(p, 0)..al.point(p, 0) + m].copy_from_slice(&value);
    }

    // AF side
    let mut native = vec![0.0; al.len()];
    let flux_data = if problem.is_linear() {
        None
    } else {
        Some(FluxData { moments: (0..dl.n_cells).flat_map(|i| flux_moments(dg, u, i)).collect(), partials })
    };
    af.rhs_with_flux_data(0.0, &mapped, &mut native, Boundary::Periodic, flux_data.as_ref())?;
    if setting.flip_point_sign {
        for p in 0..al.n_interfaces {
            for c in 0..m {
                native[al.point(p, c)] *= -1.0;
            }
        }
    }

    let mut report = EquivalenceReport {
        label: format!("{} af_update={}", setting.label(), update.name()),
        seed: setting.seed,
        flags: Vec::new(),
        families: Vec::new(),
    };
    if setting.flip_point_sign {
        report.flags.push("point update sign flipped (negative control)".into());
    }
    let points = 0..al.n_interfaces * m;
    report.families.push(FamilyReport::new(
        "point",
        max_abs_diff(&induced[points.clone()], &native[points.clone()]),
        max_abs(&induced[points]),
        setting.tolerance,
    ));
    for kk in 0..k {
        let idx: Vec<usize> = (0..dl.n_cells).flat_map(|i| (0..m).map(move |c| (i, c))).map(|(i, c)| al.moment(i, kk, c)).collect();
        let a: Vec<f64> = idx.iter().map(|&x| induced[x]).collect();
        let b: Vec<f64> = idx.iter().map(|&x| native[x]).collect();
        report.families.push(FamilyReport::new(format!("moment{kk}"), max_abs_diff(&a, &b), max_abs(&a), setting.tolerance));
    }
    Ok(report)
}

/// Result of the 1-d reconstruction identity check.
#[derive(Clone, Debug)]
pub struct ReconstructionCheck {
    /// Largest jump of the augmented field across an interface.
    pub max_jump: f64,
    /// Largest difference to the AF reconstruction at the sample points.
    pub max_mismatch: f64,
    /// Largest `|Q_{i+1/2} − q_i⁺|` (zero for upwinding with `U > 0`).
    pub max_right_weight: f64,
    pub max_left_weight: f64,
}

/// Continuity of the augmented field and agreement with the AF reconstruction
/// of the mapped dofs at `samples` random points per cell.
pub fn check_reconstruction_1d(dg: &Dg1d, u: &[f64], samples: usize, seed: u64) -> Result<ReconstructionCheck> {
    let k = dg.basis.k;
    let update = point_update_for(&dg.flux, &dg.problem)?;
    let af = Af1d::new(dg.grid.clone(), k, dg.problem, update, dg.rule.clone())?;
    let mapped = map_dg_to_af_1d(dg, u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = dg.problem.n_components();
    let n = dg.grid.n_cells;
    let mut out = ReconstructionCheck { max_jump: 0.0, max_mismatch: 0.0, max_right_weight: 0.0, max_left_weight: 0.0 };
    for c in 0..m {
        let aug: Vec<Poly> = (0..n).map(|i| augment_reconstruction_1d(dg, u, i, c)).collect::<Result<_>>()?;
        for i in 0..n {
            let next = (i + 1) % n;
            out.max_jump = out.max_jump.max((aug[i].eval(0.5) - aug[next].eval(-0.5)).abs());
            let q = af.reconstruct(&mapped, i, c);
            for _ in 0..samples {
                let x = rng.gen_range(-0.5..=0.5);
                out.max_mismatch = out.max_mismatch.max((aug[i].eval(x) - q.eval(x)).abs());
            }
            let (wl, wr) = radau_weights_1d(dg, u, i, c)?;
            out.max_left_weight = out.max_left_weight.max(wl.abs());
            out.max_right_weight = out.max_right_weight.max(wr.abs());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- 2-d

/// Weights used by the identification; a zero velocity component has no flux,
/// so any consistent pair works there and upwind-from-the-left is used.
fn mapping_weights(w: (f64, f64)) -> (f64, f64) {
    if (w.0 + w.1 - 1.0).abs() <= 1e-14 {
        w
    } else {
        (1.0, 0.0)
    }
}

/// Traces of the weighted interface state on faces, as polynomials along the face.
struct Faces {
    /// `q̂` on x-faces `[p][j]`, polynomial in `η`.
    x: Vec<Poly>,
    /// `q̂` on y-faces `[q][i]`, polynomial in `ξ`.
    y: Vec<Poly>,
    cells: Vec<Poly2>,
}

fn faces(dg: &Dg2d, u: &[f64]) -> Result<Faces> {
    if !dg.grid.x.periodic || !dg.grid.y.periodic {
        return Err(Error::Unsupported("the 2-d identification is implemented for periodic grids".into()));
    }
    let (nx, ny) = (dg.grid.x.n_cells, dg.grid.y.n_cells);
    let cells: Vec<Poly2> = (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| dg.cell_poly(u, i, j)).collect();
    let (ap, am) = mapping_weights(dg.alpha);
    let (bp, bm) = mapping_weights(dg.beta);
    let cell = |i: usize, j: usize| &cells[j * nx + i];
    let mut x = Vec::with_capacity(nx * ny);
    for p in 0..nx {
        for j in 0..ny {
            let (il, ir) = ((p + nx - 1) % nx, p);
            x.push(cell(il, j).at_xi(0.5).scale(ap).add_scaled(am, &cell(ir, j).at_xi(-0.5)));
        }
    }
    let mut y = Vec::with_capacity(nx * ny);
    for q in 0..ny {
        for i in 0..nx {
            let (jb, ja) = ((q + ny - 1) % ny, q);
            y.push(cell(i, jb).at_eta(0.5).scale(bp).add_scaled(bm, &cell(i, ja).at_eta(-0.5)));
        }
    }
    Ok(Faces { x, y, cells })
}

/// Tensorial AF dofs from a periodic 2-d DG state: weighted corner values,
/// edge moments of `q̂`, cell moments of `q`.
pub fn map_dg_to_af_2d(dg: &Dg2d, u: &[f64]) -> Result<Vec<f64>> {
    let k = dg.basis.k;
    if k == 0 {
        return Err(Error::InvalidOrder("the DG/AF identification needs K >= 1".into()));
    }
    let f = faces(dg, u)?;
    let layout = Af2dLayout::new(&dg.grid, k, Af2dVariant::Tensorial);
    let (nx, ny) = (layout.nx, layout.ny);
    let (ap, am) = mapping_weights(dg.alpha);
    let (bp, bm) = mapping_weights(dg.beta);
    let weights: Vec<Poly> = (0..k).map(|l| AfBasis::moment_weight(l).scale((l + 1) as f64)).collect();
    let mut out = vec![0.0; layout.len()];
    let cell = |i: usize, j: usize| &f.cells[j * nx + i];
    for q in 0..ny {
        for p in 0..nx {
            let (il, ir) = ((p + nx - 1) % nx, p);
            let (jb, ja) = ((q + ny - 1) % ny, q);
            out[layout.node(p, q)] = ap * bp * cell(il, jb).eval(0.5, 0.5)
                + am * bp * cell(ir, jb).eval(-0.5, 0.5)
                + ap * bm * cell(il, ja).eval(0.5, -0.5)
                + am * bm * cell(ir, ja).eval(-0.5, -0.5);
        }
    }
    for j in 0..ny {
        for p in 0..nx {
            for (l, w) in weights.iter().enumerate() {
                out[layout.xedge(p, j, l)] = w.inner(&f.x[p * ny + j]);
            }
        }
    }
    for q in 0..ny {
        for i in 0..nx {
            for (l, w) in weights.iter().enumerate() {
                out[layout.yedge(i, q, l)] = w.inner(&f.y[q * nx + i]);
            }
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            for (a, wa) in weights.iter().enumerate() {
                for (b, wb) in weights.iter().enumerate() {
                    out[layout.cell(i, j, a, b)] = cell(i, j).inner_outer(wa, wb);
                }
            }
        }
    }
    Ok(out)
}

/// The pieces of the 2-d Radau augmentation of one cell.
#[derive(Clone, Debug)]
pub struct Augmentation2d {
    pub q: Poly2,
    pub r_x: Poly2,
    pub r_y: Poly2,
    /// Corner constants `[LL, LR, RL, RR]` (first letter: x side).
    pub corners: [f64; 4],
    pub r_l: Poly,
    pub r_r: Poly,
}

impl Augmentation2d {
    /// `q + r^x + r^y + Σ C R ⊗ R`
    pub fn total(&self) -> Poly2 {
        let rr = [&self.r_l, &self.r_r];
        let mut p = self.q.add_scaled(1.0, &self.r_x).add_scaled(1.0, &self.r_y);
        for (c, (sx, sy)) in self.corners.iter().zip([(0, 0), (0, 1), (1, 0), (1, 1)]) {
            p = p.add_scaled(*c, &Poly2::outer(rr[sx], rr[sy]));
        }
        p
    }

    pub fn q_plus_rx(&self) -> Poly2 {
        self.q.add_scaled(1.0, &self.r_x)
    }

    pub fn q_plus_ry(&self) -> Poly2 {
        self.q.add_scaled(1.0, &self.r_y)
    }
}

/// Radau corrections `r^x`, `r^y` and the corner constants of cell `(i, j)`;
/// `nodes` are the mapped node values.
fn augmentation(dg: &Dg2d, f: &Faces, mapped: &[f64], layout: &Af2dLayout, i: usize, j: usize) -> Result<Augmentation2d> {
    let (nx, ny) = (layout.nx, layout.ny);
    let (r_l, r_r) = radau_pair(dg.basis.k)?;
    let q = f.cells[j * nx + i].clone();
    let (pl, pr) = (i, (i + 1) % nx);
    let (qb, qt) = (j, (j + 1) % ny);
    let hx_r = &f.x[pr * ny + j];
    let hx_l = &f.x[pl * ny + j];
    let hy_t = &f.y[qt * nx + i];
    let hy_b = &f.y[qb * nx + i];
    let r_x = Poly2::outer(&r_r, &(hx_r - &q.at_xi(0.5))).add_scaled(1.0, &Poly2::outer(&r_l, &(hx_l - &q.at_xi(-0.5))));
    let r_y = Poly2::outer(&(hy_t - &q.at_eta(0.5)), &r_r).add_scaled(1.0, &Poly2::outer(&(hy_b - &q.at_eta(-0.5)), &r_l));
    let mut corners = [0.0; 4];
    for (slot, (sx, sy)) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let x = if sx == 0 { -0.5 } else { 0.5 };
        let y = if sy == 0 { -0.5 } else { 0.5 };
        let node = mapped[layout.node(if sx == 0 { pl } else { pr }, if sy == 0 { qb } else { qt })];
        let hx = if sx == 0 { hx_l } else { hx_r };
        let hy = if sy == 0 { hy_b } else { hy_t };
        corners[slot] = node - hx.eval(y) - hy.eval(x) + q.eval(x, y);
    }
    Ok(Augmentation2d { q, r_x, r_y, corners, r_l, r_r })
}

/// Augmentation of every cell of a periodic 2-d DG state, row-major.
pub fn reconstruct_af_2d_from_dg(dg: &Dg2d, u: &[f64]) -> Result<Vec<Augmentation2d>> {
    let f = faces(dg, u)?;
    let mapped = map_dg_to_af_2d(dg, u)?;
    let layout = Af2dLayout::new(&dg.grid, dg.basis.k, Af2dVariant::Tensorial);
    (0..layout.ny)
        .flat_map(|j| (0..layout.nx).map(move |i| (i, j)))
        .map(|(i, j)| augmentation(dg, &f, &mapped, &layout, i, j))
        .collect()
}

/// Verifier options for one 2-d setting.
#[derive(Clone, Debug)]
pub struct Setting2d {
    pub k: usize,
    pub n: usize,
    pub ux: f64,
    pub uy: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub seed: u64,
    pub tolerance: f64,
    pub identity_tolerance: f64,
}

impl Setting2d {
    pub fn new(n: usize, ux: f64, uy: f64, alpha_plus: f64, beta_plus: f64, seed: u64) -> Self {
        Self {
            k: 1,
            n,
            ux,
            uy,
            alpha: (alpha_plus, 1.0 - alpha_plus),
            beta: (beta_plus, 1.0 - beta_plus),
            seed,
            tolerance: 1e-11,
            identity_tolerance: 1e-12,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "2d advection U=({},{}) alpha=({},{}) beta=({},{}) K={} grid={}x{}",
            self.ux, self.uy, self.alpha.0, self.alpha.1, self.beta.0, self.beta.1, self.k, self.n, self.n
        )
    }

    pub fn operators(&self) -> Result<(Dg2d, Af2d, Vec<f64>)> {
        let grid = Grid2D::unit_square(self.n, true);
        let dg = Dg2d::new(grid.clone(), self.k, self.ux, self.uy, self.alpha, self.beta)?;
        let af = Af2d::new(grid, self.k, Af2dVariant::Tensorial, self.ux, self.uy, self.alpha, self.beta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let u = (0..dg.layout().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok((dg, af, u))
    }
}

fn family_slices(layout: &Af2dLayout) -> [(&'static str, std::ops::Range<usize>); 4] {
    let [a, b, c, d] = layout.family_ranges();
    [("nodes", a), ("x_edges", b), ("y_edges", c), ("cells", d)]
}

/// 2-d equivalence on a random periodic state, with the reconstruction and
/// edge identities and the classical-midpoint negative control.
pub fn verify_equivalence_2d(setting: &Setting2d) -> Result<EquivalenceReport> {
    let (dg, af, u) = setting.operators()?;
    let layout = af.layout();
    let mapped = map_dg_to_af_2d(&dg, &u)?;
    let mut du = vec![0.0; u.len()];
    dg.rhs(0.0, &u, &mut du, Boundary::Periodic)?;
    // the mapping is linear and time independent
    let induced = map_dg_to_af_2d(&dg, &du)?;
    let mut native = vec![0.0; layout.len()];
    af.rhs(0.0, &mapped, &mut native, Boundary::Periodic)?;

    let mut report = EquivalenceReport { label: setting.label(), seed: setting.seed, flags: Vec::new(), families: Vec::new() };
    for (axis, v) in [("x", setting.ux), ("y", setting.uy)] {
        if v == 0.0 {
            report.flags.push(format!("U{axis} = 0: no {axis}-flux contribution in either method"));
        }
    }
    for (name, r) in family_slices(&layout) {
        report.families.push(FamilyReport::new(
            name,
            max_abs_diff(&induced[r.clone()], &native[r.clone()]),
            max_abs(&induced[r]),
            setting.tolerance,
        ));
    }
    if setting.k == 1 {
        report.families.extend(identity_checks_2d(&dg, &af, &u, setting.identity_tolerance)?);
        report.families.push(classical_negative_control(&dg, &u, &induced)?);
    }
    Ok(report)
}

/// Reconstruction and edge identities of the 2-d identification (`K = 1`).
pub fn identity_checks_2d(dg: &Dg2d, af: &Af2d, u: &[f64], tol: f64) -> Result<Vec<FamilyReport>> {
    let f = faces(dg, u)?;
    let mapped = map_dg_to_af_2d(dg, u)?;
    let layout = af.layout();
    let (nx, ny) = (layout.nx, layout.ny);
    let (ap, am) = mapping_weights(dg.alpha);
    let (bp, bm) = mapping_weights(dg.beta);
    let scale = max_abs(u).max(max_abs(&mapped));
    let augs: Vec<Augmentation2d> =
        (0..ny).flat_map(|j| (0..nx).map(move |i| (i, j))).map(|(i, j)| augmentation(dg, &f, &mapped, &layout, i, j)).collect::<Result<_>>()?;
    let aug = |i: usize, j: usize| &augs[(j % ny) * nx + (i % nx)];
    let samples: Vec<f64> = (0..7).map(|s| -0.5 + s as f64 / 6.0).collect();

    let mut corner_consistency = 0.0f64;
    let mut reconstruction = 0.0f64;
    let mut average = 0.0f64;
    let mut edge_average = 0.0f64;
    let mut corner = 0.0f64;
    let mut edge_x = 0.0f64;
    let mut edge_y = 0.0f64;
    let mut perturbed = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            let a = aug(i, j);
            let total = a.total();
            let q_af = af.reconstruct(&mapped, i, j);
            for &x in &samples {
                for &y in &samples {
                    reconstruction = reconstruction.max((total.eval(x, y) - q_af.eval(x, y)).abs());
                }
            }
            average = average.max((total.integral() - a.q.integral()).abs());
            let hx_r = &f.x[((i + 1) % nx) * ny + j];
            let hy_t = &f.y[((j + 1) % ny) * nx + i];
            edge_average = edge_average.max((total.at_xi(0.5).integral() - hx_r.integral()).abs());
            edge_average = edge_average.max((total.at_eta(0.5).integral() - hy_t.integral()).abs());
            corner = corner.max((total.eval(0.5, 0.5) - mapped[layout.node((i + 1) % nx, (j + 1) % ny)]).abs());

            // corner consistency at the node (i+1/2, j+1/2)
            let node = mapped[layout.node((i + 1) % nx, (j + 1) % ny)];
            let via_y = ap * hy_t.eval(0.5) + am * f.y[((j + 1) % ny) * nx + (i + 1) % nx].eval(-0.5);
            let via_x = bp * hx_r.eval(0.5) + bm * f.x[((i + 1) % nx) * ny + (j + 1) % ny].eval(-0.5);
            corner_consistency = corner_consistency.max((via_y - node).abs()).max((via_x - node).abs());

            // along the top edge of (i, j), as functions of x
            let (above, right) = (aug(i, j + 1), aug(i + 1, j));
            let lhs_x = a.q_plus_rx().at_eta(0.5).scale(bp).add_scaled(bm, &above.q_plus_rx().at_eta(-0.5));
            let rhs_x = total.at_eta(0.5).scale(bp).add_scaled(bm, &above.total().at_eta(-0.5));
            // along the right edge of (i, j), as functions of y
            let lhs_y = a.q_plus_ry().at_xi(0.5).scale(ap).add_scaled(am, &right.q_plus_ry().at_xi(-0.5));
            let rhs_y = total.at_xi(0.5).scale(ap).add_scaled(am, &right.total().at_xi(-0.5));
            // perturbing one coefficient of r^x breaks the first identity
            let bump = Poly2::outer(&a.r_r, &Poly::constant(0.1));
            let lhs_bumped = a.q_plus_rx().add_scaled(1.0, &bump).at_eta(0.5).scale(bp)
                .add_scaled(bm, &above.q_plus_rx().add_scaled(1.0, &bump).at_eta(-0.5));
            for &s in &samples {
                edge_x = edge_x.max((lhs_x.eval(s) - rhs_x.eval(s)).abs());
                edge_y = edge_y.max((lhs_y.eval(s) - rhs_y.eval(s)).abs());
                perturbed = perturbed.max((lhs_bumped.eval(s) - rhs_x.eval(s)).abs());
            }
        }
    }
    Ok(vec![
        FamilyReport::new("corner_consistency", corner_consistency, scale, tol),
        FamilyReport::new("augmented_equals_af", reconstruction, scale, tol),
        FamilyReport::new("average_match", average, scale, tol),
        FamilyReport::new("edge_average_match", edge_average, scale, tol),
        FamilyReport::new("corner_match", corner, scale, tol),
        FamilyReport::new("edge_identity_x", edge_x, scale, tol),
        FamilyReport::new("edge_identity_y", edge_y, scale, tol),
        FamilyReport::new("perturbed_edge_identity", perturbed, scale, 1e-3).must_differ(),
    ])
}

/// Runs the classical midpoint AF on the same reconstruction and compares the
/// Simpson combination of its node and midpoint derivatives with the
/// DG-induced edge-average derivative; must differ.
pub fn classical_negative_control(dg: &Dg2d, u: &[f64], induced: &[f64]) -> Result<FamilyReport> {
    let tensorial = map_dg_to_af_2d(dg, u)?;
    let classical_af = Af2d::new(dg.grid.clone(), 1, Af2dVariant::ClassicalMidpoint, dg.ux, dg.uy, dg.alpha, dg.beta)?;
    let lt = Af2dLayout::new(&dg.grid, 1, Af2dVariant::Tensorial);
    let lc = classical_af.layout();
    let (nx, ny) = (lt.nx, lt.ny);
    let mut classical = tensorial.clone();
    for j in 0..ny {
        for p in 0..nx {
            let (b, t) = (tensorial[lt.node(p, j)], tensorial[lt.node(p, (j + 1) % ny)]);
            classical[lc.xedge(p, j, 0)] = simpson_midpoint(tensorial[lt.xedge(p, j, 0)], b, t);
        }
    }
    for q in 0..ny {
        for i in 0..nx {
            let (l, r) = (tensorial[lt.node(i, q)], tensorial[lt.node((i + 1) % nx, q)]);
            classical[lc.yedge(i, q, 0)] = simpson_midpoint(tensorial[lt.yedge(i, q, 0)], l, r);
        }
    }
    let mut dc = vec![0.0; classical.len()];
    classical_af.rhs(0.0, &classical, &mut dc, Boundary::Periodic)?;
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..ny {
        for p in 0..nx {
            let simpson = simpson_average(dc[lc.node(p, j)], dc[lc.xedge(p, j, 0)], dc[lc.node(p, (j + 1) % ny)]);
            let target = induced[lt.xedge(p, j, 0)];
            gap = gap.max((simpson - target).abs());
            scale = scale.max(target.abs());
        }
    }
    for q in 0..ny {
        for i in 0..nx {
            let simpson = simpson_average(dc[lc.node(i, q)], dc[lc.yedge(i, q, 0)], dc[lc.node((i + 1) % nx, q)]);
            let target = induced[lt.yedge(i, q, 0)];
            gap = gap.max((simpson - target).abs());
            scale = scale.max(target.abs());
        }
    }
    Ok(FamilyReport::new("classical_midpoint_control", gap, scale, 1e-3).must_differ())
}

/// Largest `|q_i − Q_i|` over the downwind Radau points (1-d, upwind, `U > 0`).
pub fn radau_witness_1d(dg: &Dg1d, u: &[f64]) -> Result<f64> {
    let update = point_update_for(&dg.flux, &dg.problem)?;
    let af = Af1d::new(dg.grid.clone(), dg.basis.k, dg.problem, update, dg.rule.clone())?;
    let mapped = map_dg_to_af_1d(dg, u)?;
    let points = crate::poly::radau_points(dg.basis.k, crate::poly::RadauSide::Left)?;
    let mut worst = 0.0f64;
    for i in 0..dg.grid.n_cells {
        let q = dg.cell_poly(u, i, 0);
        let qa = af.reconstruct(&mapped, i, 0);
        for &x in &points {
            worst = worst.max((q.eval(x) - qa.eval(x)).abs());
        }
    }
    Ok(worst)
}

/// Largest `|q_ij − Q_ij|` over the crossing points of the Radau zero lines
/// (2-d, upwind with positive velocities).
pub fn crossing_witness_2d(dg: &Dg2d, u: &[f64]) -> Result<f64> {
    let augs = reconstruct_af_2d_from_dg(dg, u)?;
    let points = crate::poly::radau_points(dg.basis.k, crate::poly::RadauSide::Left)?;
    let mut worst = 0.0f64;
    for a in &augs {
        let total = a.total();
        for &x in &points {
            for &y in &points {
                worst = worst.max((a.q.eval(x, y) - total.eval(x, y)).abs());
            }
        }
    }
    Ok(worst)
}

/// The acceptance sweep of 1-d linear settings.
pub fn linear_1d_settings(seed: u64) -> Vec<Setting1d> {
    let mut v = Vec::new();
    for k in 1..=4 {
        for flux in [NumericalFlux::Upwind, NumericalFlux::Central, NumericalFlux::alpha(0.7)] {
            v.push(Setting1d::new(Problem::Advection1d { u: 1.0 }, flux, k, 64, seed + k as u64));
        }
    }
    v
}

/// The acceptance sweep of 1-d nonlinear settings (LF constant from the state).
pub fn nonlinear_1d_settings(seed: u64) -> Vec<Setting1d> {
    let mut v = Vec::new();
    for problem in [Problem::Burgers, Problem::ExpFlux] {
        for k in 1..=2 {
            v.push(Setting1d::new(problem, NumericalFlux::LaxFriedrichs { a: 0.0 }, k, 64, seed + k as u64));
        }
    }
    v
}

#[allow(dead_code)]
fn dg2d_state_from_fn(grid: &Grid2D, k: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    DgState2D::from_fn(grid, k, &gauss_legendre_rule(PROJECTION_POINTS), f).data
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn moment_transfer_k1() {
        let t = moment_transfer(1).unwrap();
        assert_abs_diff_eq!(t[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t[0][1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_state_maps_to_constant() {
        let s = Setting1d::new(Problem::Advection1d { u: 1.0 }, NumericalFlux::alpha(0.3), 3, 8, 0);
        let (dg, _) = dg_for_setting(&s).unwrap();
        let mut u = vec![0.0; dg.layout().len()];
        for i in 0..8 {
            u[dg.layout().index(i, 0, 0)] = 0.4;
        }
        let mapped = map_dg_to_af_1d(&dg, &u).unwrap();
        let l = Af1dLayout::new(&dg.grid, 3, 1);
        let cm = AfBasis::moment_weight(0);
        assert_abs_diff_eq!(cm.integral(), 1.0);
        for p in 0..8 {
            assert_abs_diff_eq!(mapped[l.point(p, 0)], 0.4, epsilon = 1e-15);
        }
        for i in 0..8 {
            assert_abs_diff_eq!(mapped[l.moment(i, 0, 0)], 0.4, epsilon = 1e-15);
            assert_abs_diff_eq!(mapped[l.moment(i, 1, 0)], 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(mapped[l.moment(i, 2, 0)], 0.4, epsilon = 1e-15);
        }
    }

    #[test]
    fn upwind_mapping_takes_left_trace() {
        let s = Setting1d::new(Problem::Advection1d { u: 1.0 }, NumericalFlux::Upwind, 2, 8, 3);
        let (dg, u) = dg_for_setting(&s).unwrap();
        let mapped = map_dg_to_af_1d(&dg, &u).unwrap();
        let l = Af1dLayout::new(&dg.grid, 2, 1);
        let mut differs = false;
        for i in 0..8 {
            let (qm, qp) = dg.traces(&u, i);
            assert_eq!(mapped[l.point(dg.grid.right_interface(i), 0)], qp[0]);
            differs |= (mapped[l.point(dg.grid.left_interface(i), 0)] - qm[0]).abs() > 1e-3;
        }
        assert!(differs);
    }

    #[test]
    fn linear_equivalence_including_systems() {
        for s in linear_1d_settings(7) {
            let r = verify_equivalence_1d(&s).unwrap();
            assert!(r.pass(), "{} {:?}", s.label(), r.families);
        }
        for flux in [NumericalFlux::Upwind, NumericalFlux::LaxFriedrichs { a: 0.0 }, NumericalFlux::Central] {
            for k in 1..=3 {
                let s = Setting1d::new(Problem::Acoustics { c: 1.3 }, flux, k, 16, 5);
                let r = verify_equivalence_1d(&s).unwrap();
                assert!(r.pass(), "{} {:?}", s.label(), r.families);
            }
        }
        let s = Setting1d::new(Problem::Advection1d { u: -0.7 }, NumericalFlux::Upwind, 2, 16, 5);
        assert!(verify_equivalence_1d(&s).unwrap().pass());
    }

    #[test]
    fn nonlinear_equivalence_and_sign_control() {
        for s in nonlinear_1d_settings(3) {
            let r = verify_equivalence_1d(&s).unwrap();
            assert!(r.pass(), "{} {:?}", s.label(), r.families);
            let mut flipped = s.clone();
            flipped.flip_point_sign = true;
            let r = verify_equivalence_1d(&flipped).unwrap();
            let point = r.families.iter().find(|f| f.family == "point").unwrap();
            assert!(point.relative >= 0.1, "{}", point.relative);
        }
    }

    #[test]
    fn flux_projection_k1_average() {
        // Burgers with q = 1 + ξ on one unit cell: f̄ = ½∫(1+ξ)² = 13/24
        let grid = Grid1D::new(0.0, 1.0, 1, true).unwrap();
        let dg = Dg1d::new(grid, 1, Problem::Burgers, NumericalFlux::Central, gauss_legendre_rule(4)).unwrap();
        let u = vec![1.0, 0.5];
        let f = project_flux_f(&dg, &u, 0, 0.1, 0.2).unwrap();
        assert_abs_diff_eq!(f.integral(), 13.0 / 24.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.eval(-0.5), 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(f.eval(0.5), 0.2, epsilon = 1e-14);
    }

    #[test]
    fn reconstruction_identity_1d() {
        for flux in [NumericalFlux::Upwind, NumericalFlux::Central, NumericalFlux::alpha(0.7)] {
            for k in 1..=4 {
                let s = Setting1d::new(Problem::Advection1d { u: 1.0 }, flux, k, 32, 9);
                let (dg, u) = dg_for_setting(&s).unwrap();
                let c = check_reconstruction_1d(&dg, &u, 50, 1).unwrap();
                assert!(c.max_jump <= 1e-13, "{}", c.max_jump);
                assert!(c.max_mismatch <= 1e-12, "{}", c.max_mismatch);
                if flux == NumericalFlux::Upwind {
                    assert_eq!(c.max_right_weight, 0.0);
                    assert!(radau_witness_1d(&dg, &u).unwrap() <= 1e-13);
                } else {
                    assert!(c.max_right_weight > 0.0 && c.max_left_weight > 0.0);
                }
            }
        }
    }

    #[test]
    fn equivalence_2d() {
        for (ap, bp) in [(1.0, 1.0), (0.8, 0.6)] {
            let s = Setting2d::new(8, 1.0, 0.7, ap, bp, 2);
            let r = verify_equivalence_2d(&s).unwrap();
            assert!(r.pass(), "{:?}", r.families);
        }
        // one velocity component zero
        let s = Setting2d::new(6, 0.0, -1.0, 0.5, 0.0, 4);
        let r = verify_equivalence_2d(&s).unwrap();
        assert!(r.pass(), "{:?}", r.families);
        assert_eq!(r.flags.len(), 1);
    }

    #[test]
    fn equivalence_2d_higher_k() {
        // the tensorial identification carries over to K = 2
        let mut s = Setting2d::new(6, 1.0, 0.6, 1.0, 1.0, 5);
        s.k = 2;
        let r = verify_equivalence_2d(&s).unwrap();
        assert!(r.pass(), "{:?}", r.families);
    }

    #[test]
    fn crossing_points_2d() {
        let s = Setting2d::new(6, 1.0, 0.5, 1.0, 1.0, 8);
        let (dg, _, u) = s.operators().unwrap();
        assert!(crossing_witness_2d(&dg, &u).unwrap() <= 1e-13);
    }

    #[test]
    fn riesz_route_matches_mapping_of_derivative_2d() {
        let s = Setting2d::new(5, 0.9, -0.4, 0.8, 0.3, 12);
        let (dg, _, u) = s.operators().unwrap();
        let mut du = vec![0.0; u.len()];
        dg.rhs(0.0, &u, &mut du, Boundary::Periodic).unwrap();
        let induced = map_dg_to_af_2d(&dg, &du).unwrap();
        let l = Af2dLayout::new(&dg.grid, 1, Af2dVariant::Tensorial);
        let (v_l, v_r) = riesz_endpoint_functionals(1).unwrap();
        let one = Poly::constant(1.0);
        // x-edge (p=2, j=3): α⁺ ∫∫ v_R·1 q̇_{1,3} + α⁻ ∫∫ v_L·1 q̇_{2,3}
        let a = dg.test_functional(&u, 1, 3, &v_r, &one).unwrap();
        let b = dg.test_functional(&u, 2, 3, &v_l, &one).unwrap();
        assert_abs_diff_eq!(0.8 * a + 0.2 * b, induced[l.xedge(2, 3, 0)], epsilon = 1e-11);
        // node (2, 3): four-corner combination
        let c = [
            (0.8 * 0.3, dg.test_functional(&u, 1, 2, &v_r, &v_r).unwrap()),
            (0.2 * 0.3, dg.test_functional(&u, 2, 2, &v_l, &v_r).unwrap()),
            (0.8 * 0.7, dg.test_functional(&u, 1, 3, &v_r, &v_l).unwrap()),
            (0.2 * 0.7, dg.test_functional(&u, 2, 3, &v_l, &v_l).unwrap()),
        ];
        let node: f64 = c.iter().map(|(w, v)| w * v).sum();
        assert_abs_diff_eq!(node, induced[l.node(2, 3)], epsilon = 1e-10);
    }
}
