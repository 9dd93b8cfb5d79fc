//! Browser bindings: a space-time picture of one run, the averaging error
//! curve over a frequency ladder, and the coefficient profile.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use oscillakdv::diagnostics::{self, NormSpec};
use oscillakdv::experiments::gaussian;
use oscillakdv::forcing::{self, CoefficientSpec};
use oscillakdv::{evolve, make_grid, Scheme, SolverConfig};
use wasm_bindgen::prelude::*;

const K: u32 = 5;
const GRID_N: usize = 256;
const DOMAIN: f64 = 32.0;
const PERIOD: f64 = 2.0 * PI;
const STEP_PERIOD: f64 = 4.0;
const STEP_EPS: f64 = 0.2;

fn coefficient(variant: &str) -> Result<CoefficientSpec, String> {
    let spec = match variant {
        "cosine" => CoefficientSpec::cosine(PERIOD),
        "cos_squared" => CoefficientSpec::cos_squared(PERIOD),
        "step" => CoefficientSpec::step_example(STEP_EPS, STEP_PERIOD),
        "constant" => Ok(CoefficientSpec::constant(1.0)),
        other => return Err(format!("unknown coefficient '{other}'")),
    };
    spec.map_err(|e| e.to_string())
}

fn config(t_end: f64, frames: usize) -> Result<SolverConfig, String> {
    if !(t_end > 0.0 && t_end <= 20.0) {
        return Err("t_end must lie in (0, 20]".into());
    }
    if !(1..=400).contains(&frames) {
        return Err("frames must lie in [1, 400]".into());
    }
    Ok(SolverConfig::new(K, Scheme::Etdrk4, 2e-3_f64.min(t_end), t_end).with_uniform_snapshots(frames))
}

/// `frames + 1` rows of `GRID_N` samples, row-major; a shorter result means
/// the run stopped early (growth or overflow).
pub fn spacetime(amplitude: f64, width: f64, variant: &str, omega: f64, t_end: f64, frames: usize) -> Result<Vec<f64>, String> {
    let grid = make_grid(GRID_N, DOMAIN).map_err(|e| e.to_string())?;
    if !(width > 0.0) || !amplitude.is_finite() {
        return Err("need a finite amplitude and positive width".into());
    }
    let phi = gaussian(&grid, amplitude, width, 0.0);
    let spec = coefficient(variant)?.with_frequency(omega, 0.0);
    let traj = evolve(&phi, &spec, &config(t_end, frames)?);
    Ok(traj
        .snapshots
        .iter()
        .flat_map(|s| s.field.physical_values().into_owned())
        .collect())
}

/// `sup_t ‖u_ω − U‖_{H¹}` on `[0, t_end]` for each frequency, where `U`
/// evolves with the mean coefficient.
pub fn averaging_errors(amplitude: f64, variant: &str, omegas: &[f64], t_end: f64) -> Result<Vec<f64>, String> {
    let grid = make_grid(GRID_N, DOMAIN).map_err(|e| e.to_string())?;
    let phi = gaussian(&grid, amplitude, 2.0, 0.0);
    let spec = coefficient(variant)?;
    let mut cfg = config(t_end, 20)?;
    let fastest = omegas.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    cfg.dt = cfg.dt.min(spec.with_frequency(fastest, 0.0).resolution_dt(20.0));
    let limit = evolve(&phi, &CoefficientSpec::constant(forcing::mean(&spec)), &cfg);
    omegas
        .iter()
        .map(|&w| {
            let run = evolve(&phi, &spec.with_frequency(w, 0.0), &cfg);
            if !run.status.is_completed() || !limit.status.is_completed() {
                return Ok(f64::NAN);
            }
            let diff = diagnostics::difference(&run, &limit).map_err(|e| e.to_string())?;
            diagnostics::norm_of(&diff, NormSpec::HSobolev { s: 1.0 }).map_err(|e| e.to_string())
        })
        .collect()
}

/// `g(s)` at `samples` equally spaced points over one period.
pub fn profile(variant: &str, samples: usize) -> Result<Vec<f64>, String> {
    let spec = coefficient(variant)?;
    let m = samples.max(2);
    Ok((0..m).map(|i| spec.profile(spec.period * i as f64 / m as f64)).collect())
}

#[wasm_bindgen(js_name = spacetime)]
pub fn spacetime_js(amplitude: f64, width: f64, variant: &str, omega: f64, t_end: f64, frames: usize) -> Result<Vec<f64>, JsError> {
    spacetime(amplitude, width, variant, omega, t_end, frames).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = averagingErrors)]
pub fn averaging_errors_js(amplitude: f64, variant: &str, omegas: Vec<f64>, t_end: f64) -> Result<Vec<f64>, JsError> {
    averaging_errors(amplitude, variant, &omegas, t_end).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = coefficientProfile)]
pub fn profile_js(variant: &str, samples: usize) -> Result<Vec<f64>, JsError> {
    profile(variant, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = gridSize)]
pub fn grid_size() -> usize {
    GRID_N
}

#[wasm_bindgen(js_name = domainLength)]
pub fn domain_length() -> f64 {
    DOMAIN
}
