//! Browser bindings: a 1-d advection run with plotted profiles, the
//! equivalence check for one setting, and the dof table.

use afdg::equiv::{self, Setting1d};
use afdg::experiments::{dof_table_csv, run_simulation, Discretization, RunConfig};
use afdg::problems::{NumericalFlux, Problem};
use wasm_bindgen::prelude::*;

/// Samples per cell of a plotted profile.
const SAMPLES: usize = 8;

fn config(method: &str, order: usize, cells: usize, t_final: f64) -> Result<RunConfig, String> {
    let text = format!("method = {method}\norder = {order}\nrk = ssprk54\nproblem = advection\ngrids = {cells}\nt_final = {t_final}\n");
    RunConfig::parse(&text).map_err(|e| e.to_string())
}

/// Runs 1-d periodic advection of a sine and returns `[x, numerical, exact]`
/// triples at `SAMPLES` points per cell followed by `E_dofs` as the last entry.
pub fn profile(method: &str, order: usize, cells: usize, t_final: f64) -> Result<Vec<f64>, String> {
    let cfg = config(method, order, cells, t_final)?;
    let run = run_simulation(&cfg, cells).map_err(|e| e.to_string())?;
    let disc = Discretization::build(&cfg, cells).map_err(|e| e.to_string())?;
    let exact = cfg.exact();
    let mut out = Vec::with_capacity(3 * cells * SAMPLES + 1);
    for i in 0..cells {
        let poly = match &disc {
            Discretization::Af1d(d) => d.reconstruct(&run.state, i, 0),
            Discretization::Dg1d(d) => d.cell_poly(&run.state, i, 0),
            _ => return Err("only 1-d methods are plotted".into()),
        };
        for s in 0..SAMPLES {
            let xi = -0.5 + (s as f64 + 0.5) / SAMPLES as f64;
            let x = (i as f64 + 0.5 + xi) / cells as f64;
            out.extend([x, poly.eval(xi), exact.value_1d(t_final, x)[0]]);
        }
    }
    out.push(run.errors.e_dofs);
    Ok(out)
}

/// Equivalence CSV for scalar 1-d problem `problem` with the given flux name
/// (`upwind`, `central`, `lf` or a weight `α⁺` in `[0, 1]`).
pub fn equivalence(problem: &str, flux: &str, k: usize, cells: usize, seed: u64) -> Result<String, String> {
    let problem = match problem {
        "advection" => Problem::Advection1d { u: 1.0 },
        "burgers" => Problem::Burgers,
        "expflux" => Problem::ExpFlux,
        other => return Err(format!("unknown problem '{other}'")),
    };
    let flux = match flux {
        "upwind" => NumericalFlux::Upwind,
        "central" => NumericalFlux::Central,
        "lf" => NumericalFlux::LaxFriedrichs { a: 0.0 },
        w => NumericalFlux::alpha(w.parse::<f64>().map_err(|_| format!("unknown flux '{w}'"))?),
    };
    let report = equiv::verify_equivalence_1d(&Setting1d::new(problem, flux, k, cells, seed)).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf, true).map_err(|e| e.to_string())?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

#[wasm_bindgen(js_name = advectionProfile)]
pub fn advection_profile(method: &str, order: usize, cells: usize, t_final: f64) -> Result<Vec<f64>, JsError> {
    profile(method, order, cells, t_final).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = equivalenceCheck)]
pub fn equivalence_check(problem: &str, flux: &str, k: usize, cells: usize, seed: u64) -> Result<String, JsError> {
    equivalence(problem, flux, k, cells, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dofTable)]
pub fn dof_table() -> Result<String, JsError> {
    dof_table_csv().map_err(|e| JsError::new(&e.to_string()))
}
