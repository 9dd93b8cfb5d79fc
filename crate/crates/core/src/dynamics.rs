//! Time integration of `u_t + u_xxx + g(ω(t+t₀))·∂x(u^{k+1}) = 0`.
//!
//! Both steppers treat the dispersive term exactly through the Airy
//! multiplier `e^{iκ³h}` and only discretize the Duhamel integral of the
//! nonlinear forcing:
//!
//! * [`Scheme::IfRk4`] runs classical RK4 on `w(τ) = S(-τ)u(τ)`;
//! * [`Scheme::Etdrk4`] is the Cox–Matthews exponential integrator with
//!   φ-function weights averaged over a complex contour.
//!
//! The state between steps is kept as physical samples, so a run can be
//! checkpointed and resumed bit for bit from `(u, t)` alone.

use std::ops::ControlFlow;
use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{Error, Result, Violation};
use crate::forcing::{self, CoefficientSpec};
use crate::spectral::{DealiasPolicy, Field, Grid1D};

/// Samples of `g` required per oscillation period.
pub const STEPS_PER_OSCILLATION: f64 = 20.0;

/// Contour points for the ETDRK4 φ-function averages.
const CONTOUR_POINTS: usize = 32;

/// Initial data larger than this at the box edge triggers a warning.
const EDGE_WARN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    IfRk4,
    Etdrk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub k: u32,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: DealiasPolicy,
    /// Requested output times in `[0, t_end]`; `0` and `t_end` are always recorded.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_h1_factor")]
    pub blowup_h1_factor: f64,
    #[serde(default = "default_amp_max")]
    pub blowup_amp_max: f64,
    #[serde(default = "default_check_every")]
    pub conserve_check_every: u64,
}

fn default_h1_factor() -> f64 {
    10.0
}

fn default_amp_max() -> f64 {
    1e6
}

fn default_check_every() -> u64 {
    10
}

impl SolverConfig {
    pub fn new(k: u32, scheme: Scheme, dt: f64, t_end: f64) -> Self {
        Self {
            k,
            scheme,
            dt,
            t_end,
            dealias: DealiasPolicy::Exact { k },
            snapshot_times: Vec::new(),
            blowup_h1_factor: default_h1_factor(),
            blowup_amp_max: default_amp_max(),
            conserve_check_every: default_check_every(),
        }
    }

    /// `count + 1` equally spaced snapshots on `[0, t_end]`.
    pub fn with_uniform_snapshots(mut self, count: usize) -> Self {
        self.snapshot_times = uniform_times(self.t_end, count);
        self
    }

    pub fn violations(&self, prefix: &str) -> Vec<Violation> {
        let key = |k: &str| format!("{prefix}{k}");
        let mut v = Vec::new();
        if self.k < 1 {
            v.push(Violation::new(key("k"), "nonlinearity power must be at least 1"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            v.push(Violation::new(key("t_end"), "must be positive and finite"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            v.push(Violation::new(key("dt"), "must be positive and finite"));
        } else if self.dt > self.t_end {
            v.push(Violation::new(key("dt"), "must not exceed t_end"));
        }
        if self
            .snapshot_times
            .iter()
            .any(|&s| !(s.is_finite() && s >= 0.0 && s <= self.t_end))
        {
            v.push(Violation::new(key("snapshot_times"), "every time must lie in [0, t_end]"));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            v.push(Violation::new(key("snapshot_times"), "must be sorted"));
        }
        if !(self.blowup_h1_factor > 1.0) {
            v.push(Violation::new(key("blowup_h1_factor"), "must exceed 1"));
        }
        if !(self.blowup_amp_max > 0.0) {
            v.push(Violation::new(key("blowup_amp_max"), "must be positive"));
        }
        if self.conserve_check_every == 0 {
            v.push(Violation::new(key("conserve_check_every"), "must be at least 1"));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations("solver.");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Output times actually used: sorted, deduplicated, ending at `t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .snapshot_times
            .iter()
            .copied()
            .filter(|&s| s > 0.0 && s < self.t_end)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times.push(self.t_end);
        times
    }
}

pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| t_end * i as f64 / count as f64)
        .collect()
}

/// Local-existence heuristic `T = C / (A² ‖φ‖_{H¹}^{2k})`.
pub fn existence_time(sup_g: f64, phi_h1: f64, k: u32, c: f64) -> f64 {
    c / (sup_g * sup_g * phi_h1.powi(2 * k as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthTrigger {
    H1Factor,
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RunStatus {
    Completed,
    BlowupDetected { t: f64, trigger: GrowthTrigger },
    NanDetected { t: f64 },
    /// Stopped early by an observer (checkpoint tests, user abort).
    Interrupted { t: f64 },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::BlowupDetected { .. } => "blowup_detected",
            RunStatus::NanDetected { .. } => "nan_detected",
            RunStatus::Interrupted { .. } => "interrupted",
        }
    }

    pub fn growth_time(&self) -> Option<f64> {
        match *self {
            RunStatus::BlowupDetected { t, .. } => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarRecord {
    pub t: f64,
    pub mass: f64,
    /// Energy evaluated with the mean coefficient `m(g)`.
    pub energy: f64,
    pub h1_norm: f64,
    pub g_value: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<Grid1D>,
    pub snapshots: Vec<Snapshot>,
    pub scalars: Vec<ScalarRecord>,
    pub status: RunStatus,
    /// Step size cap actually used (after the oscillation constraint).
    pub dt: f64,
    pub peak_h1: f64,
    pub peak_amplitude: f64,
    pub steps: u64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    /// Largest relative mass deviation among the scalar records.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.scalars.iter().map(|r| r.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.scalars.iter().map(|r| r.energy))
    }
}

fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else {
        return 0.0;
    };
    let worst = values.fold(0.0_f64, |m, v| m.max((v - first).abs()));
    if first == 0.0 {
        worst
    } else {
        worst / first.abs()
    }
}

/// Complete stepping state between two steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub u: Vec<f64>,
    pub t: f64,
    /// Index of the output interval currently being traversed.
    pub segment: usize,
    pub step_in_segment: u64,
    pub steps_taken: u64,
    pub initial_h1: f64,
}

impl RunState {
    pub fn initial(phi: &Field) -> Self {
        Self {
            u: phi.physical_values().into_owned(),
            t: 0.0,
            segment: 0,
            step_in_segment: 0,
            steps_taken: 0,
            initial_h1: diagnostics::sobolev_norm(phi, 1.0),
        }
    }
}

/// Hooks into a running [`evolve_observed`] call.
pub trait Observer {
    fn on_snapshot(&mut self, _t: f64, _u: &Field) {}

    /// Called after every completed step; `Break` stops the run.
    fn on_step(&mut self, _state: &RunState) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl Observer for () {}

/// Nonlinear term `N(v̂, t) = -g·iκ·P[u^{k+1}]^` on raw buffers.
struct Tendency {
    grid: Arc<Grid1D>,
    power: i32,
    /// `iκ` times the dealias mask, Nyquist removed.
    derivative: Vec<Complex64>,
    phys: Vec<f64>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Tendency {
    fn new(grid: Arc<Grid1D>, k: u32, policy: DealiasPolicy) -> Self {
        let n = grid.n();
        if policy == DealiasPolicy::TwoThirds && k > 1 {
            warn!("two-thirds dealiasing does not remove aliasing of a degree-{} product", k + 1);
        }
        let mask = policy.mask(n);
        let derivative = grid
            .derivative_multiplier(1)
            .into_iter()
            .zip(mask)
            .map(|(d, m)| d * m)
            .collect();
        let scratch = vec![Complex64::default(); grid.scratch_len()];
        Self {
            grid,
            power: k as i32 + 1,
            derivative,
            phys: vec![0.0; n],
            work: vec![Complex64::default(); n],
            scratch,
        }
    }

    /// Tendency from physical samples.
    fn of_physical(&mut self, u: &[f64], g: f64, out: &mut [Complex64]) {
        if g == 0.0 {
            out.fill(Complex64::default());
            return;
        }
        for (p, &v) in self.phys.iter_mut().zip(u) {
            *p = v.powi(self.power);
        }
        self.grid.forward_into(&self.phys, out, &mut self.scratch);
        for (o, d) in out.iter_mut().zip(&self.derivative) {
            *o *= d * -g;
        }
    }

    /// Tendency from spectral coefficients.
    fn of_spectral(&mut self, v: &[Complex64], g: f64, out: &mut [Complex64]) {
        if g == 0.0 {
            out.fill(Complex64::default());
            return;
        }
        self.work.copy_from_slice(v);
        let mut u = std::mem::take(&mut self.phys);
        self.grid.inverse_into(&mut self.work, &mut u, &mut self.scratch);
        for p in u.iter_mut() {
            *p = p.powi(self.power);
        }
        self.grid.forward_into(&u, out, &mut self.scratch);
        self.phys = u;
        for (o, d) in out.iter_mut().zip(&self.derivative) {
            *o *= d * -g;
        }
    }
}

/// Per-step-size weights.
enum Weights {
    IfRk4 {
        e: Vec<Complex64>,
        e2: Vec<Complex64>,
    },
    Etdrk4 {
        e: Vec<Complex64>,
        e2: Vec<Complex64>,
        q: Vec<Complex64>,
        f1: Vec<Complex64>,
        f2: Vec<Complex64>,
        f3: Vec<Complex64>,
    },
}

/// Contour averages of the ETDRK4 φ-functions at `z = h·iκ³`, scaled by `h`.
fn etd_coefficients(z: Complex64, h: f64) -> [Complex64; 4] {
    let mut acc = [Complex64::default(); 4];
    for j in 0..CONTOUR_POINTS {
        let theta = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / CONTOUR_POINTS as f64;
        let w = z + Complex64::from_polar(1.0, theta);
        let ew = w.exp();
        let w2 = w * w;
        let w3 = w2 * w;
        acc[0] += ((w * 0.5).exp() - 1.0) / w;
        acc[1] += (-4.0 - w + ew * (4.0 - 3.0 * w + w2)) / w3;
        acc[2] += (2.0 + w + ew * (w - 2.0)) / w3;
        acc[3] += (-4.0 - 3.0 * w - w2 + ew * (4.0 - w)) / w3;
    }
    acc.map(|a| a * (h / CONTOUR_POINTS as f64))
}

impl Weights {
    fn build(grid: &Grid1D, scheme: Scheme, h: f64) -> Self {
        let e = grid.airy_multiplier(h);
        let e2 = grid.airy_multiplier(0.5 * h);
        match scheme {
            Scheme::IfRk4 => Weights::IfRk4 { e, e2 },
            Scheme::Etdrk4 => {
                let n = grid.n();
                let nyq = grid.nyquist_index();
                let mut q = Vec::with_capacity(n);
                let mut f1 = Vec::with_capacity(n);
                let mut f2 = Vec::with_capacity(n);
                let mut f3 = Vec::with_capacity(n);
                for (j, &kappa) in grid.wavenumbers().iter().enumerate() {
                    let lin = if j == nyq { 0.0 } else { kappa * kappa * kappa };
                    let [a, b, c, d] = etd_coefficients(Complex64::new(0.0, lin * h), h);
                    q.push(a);
                    f1.push(b);
                    f2.push(c);
                    f3.push(d);
                }
                Weights::Etdrk4 { e, e2, q, f1, f2, f3 }
            }
        }
    }
}

/// One-step integrator with cached weights for the most recent step size.
pub struct Stepper {
    scheme: Scheme,
    tendency: Tendency,
    weights: Option<(u64, Weights)>,
    v: Vec<Complex64>,
    stage: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
    tmp2: Vec<Complex64>,
    next: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: Arc<Grid1D>, cfg: &SolverConfig) -> Self {
        let n = grid.n();
        let zeros = || vec![Complex64::default(); n];
        let scratch = vec![Complex64::default(); grid.scratch_len()];
        Self {
            scheme: cfg.scheme,
            tendency: Tendency::new(grid, cfg.k, cfg.dealias),
            weights: None,
            v: zeros(),
            stage: [zeros(), zeros(), zeros(), zeros()],
            tmp: zeros(),
            tmp2: zeros(),
            next: zeros(),
            scratch,
        }
    }

    fn ensure_weights(&mut self, h: f64) {
        let stale = !matches!(&self.weights, Some((bits, _)) if *bits == h.to_bits());
        if stale {
            let w = Weights::build(&self.tendency.grid, self.scheme, h);
            self.weights = Some((h.to_bits(), w));
        }
    }

    /// Spectral coefficients of the most recent step's output.
    pub fn last_spectral(&self) -> &[Complex64] {
        &self.next
    }

    /// Advance physical samples `u` at time `t` by `h`, writing into `out`.
    pub fn advance(&mut self, u: &[f64], t: f64, h: f64, spec: &CoefficientSpec, out: &mut [f64]) {
        self.ensure_weights(h);
        let grid = self.tendency.grid.clone();
        grid.forward_into(u, &mut self.v, &mut self.scratch);
        let g0 = forcing::eval(spec, t);
        let g_half = forcing::eval(spec, t + 0.5 * h);
        let g1 = forcing::eval(spec, t + h);
        let [na, nb, nc, nd] = &mut self.stage;
        self.tendency.of_physical(u, g0, na);
        let v = &self.v;
        let next = &mut self.next;
        let tmp = &mut self.tmp;
        let tmp2 = &mut self.tmp2;
        match &self.weights.as_ref().expect("weights built above").1 {
            Weights::IfRk4 { e, e2 } => {
                for i in 0..v.len() {
                    tmp[i] = e2[i] * (v[i] + na[i] * (0.5 * h));
                }
                self.tendency.of_spectral(tmp, g_half, nb);
                for i in 0..v.len() {
                    tmp[i] = e2[i] * v[i] + nb[i] * (0.5 * h);
                }
                self.tendency.of_spectral(tmp, g_half, nc);
                for i in 0..v.len() {
                    tmp[i] = e[i] * v[i] + e2[i] * nc[i] * h;
                }
                self.tendency.of_spectral(tmp, g1, nd);
                for i in 0..v.len() {
                    next[i] = e[i] * v[i]
                        + (e[i] * na[i] + e2[i] * (nb[i] + nc[i]) * 2.0 + nd[i]) * (h / 6.0);
                }
            }
            Weights::Etdrk4 { e, e2, q, f1, f2, f3 } => {
                // a = e2 v + q N(v); b = e2 v + q N(a); c = e2 a + q (2N(b) - N(v))
                for i in 0..v.len() {
                    tmp[i] = e2[i] * v[i] + q[i] * na[i];
                }
                self.tendency.of_spectral(tmp, g_half, nb);
                for i in 0..v.len() {
                    tmp2[i] = e2[i] * v[i] + q[i] * nb[i];
                }
                self.tendency.of_spectral(tmp2, g_half, nc);
                for i in 0..v.len() {
                    tmp2[i] = e2[i] * tmp[i] + q[i] * (nc[i] * 2.0 - na[i]);
                }
                self.tendency.of_spectral(tmp2, g1, nd);
                for i in 0..v.len() {
                    next[i] = e[i] * v[i]
                        + f1[i] * na[i]
                        + f2[i] * (nb[i] + nc[i]) * 2.0
                        + f3[i] * nd[i];
                }
            }
        }
        self.tmp.copy_from_slice(&self.next);
        grid.inverse_into(&mut self.tmp, out, &mut self.scratch);
    }
}

/// `N(u, t) = -g(ω(t+t₀))·∂x(u^{k+1})`, dealiased, in spectral form.
pub fn nonlinear_tendency(u: &Field, t: f64, spec: &CoefficientSpec, cfg: &SolverConfig) -> Field {
    let grid = u.grid().clone();
    let mut tendency = Tendency::new(grid.clone(), cfg.k, cfg.dealias);
    let mut out = vec![Complex64::default(); grid.n()];
    tendency.of_physical(&u.physical_values(), forcing::eval(spec, t), &mut out);
    Field::from_spectral(grid, out)
}

/// One step of size `cfg.dt` from time `t`.
pub fn step(u: &Field, t: f64, spec: &CoefficientSpec, cfg: &SolverConfig) -> Field {
    let grid = u.grid().clone();
    let mut stepper = Stepper::new(grid.clone(), cfg);
    let mut out = vec![0.0; grid.n()];
    stepper.advance(&u.physical_values(), t, cfg.dt, spec, &mut out);
    Field::from_physical(grid, out)
}

/// Growth proxy: H¹ norm beyond `blowup_h1_factor × initial_h1`, or
/// `max|u|` beyond `blowup_amp_max`.
pub fn detect_blowup(u: &Field, initial_h1: f64, cfg: &SolverConfig) -> Option<GrowthTrigger> {
    growth_trigger(diagnostics::sobolev_norm(u, 1.0), u.max_abs(), initial_h1, cfg)
}

fn growth_trigger(h1: f64, amplitude: f64, initial_h1: f64, cfg: &SolverConfig) -> Option<GrowthTrigger> {
    if initial_h1 > 0.0 && h1 > cfg.blowup_h1_factor * initial_h1 {
        Some(GrowthTrigger::H1Factor)
    } else if amplitude > cfg.blowup_amp_max {
        Some(GrowthTrigger::Amplitude)
    } else {
        None
    }
}

/// Step cap after the oscillation-resolution constraint.
pub fn effective_dt(spec: &CoefficientSpec, cfg: &SolverConfig) -> f64 {
    cfg.dt.min(spec.resolution_dt(STEPS_PER_OSCILLATION))
}

fn steps_in(len: f64, dt: f64) -> u64 {
    ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

fn scalar_record(u: &Field, t: f64, spec: &CoefficientSpec, k: u32, lambda: f64) -> ScalarRecord {
    ScalarRecord {
        t,
        mass: diagnostics::mass(u),
        energy: diagnostics::energy(u, lambda, k),
        h1_norm: diagnostics::sobolev_norm(u, 1.0),
        g_value: forcing::eval(spec, t),
    }
}

/// Where a run begins.
pub enum Start<'a> {
    Initial(&'a Field),
    Resume { grid: Arc<Grid1D>, state: RunState },
}

/// Integrate from `phi` to `cfg.t_end`.
pub fn evolve(phi: &Field, spec: &CoefficientSpec, cfg: &SolverConfig) -> Trajectory {
    evolve_observed(Start::Initial(phi), spec, cfg, &mut ())
}

/// [`evolve`] with observer callbacks and optional resume.
///
/// Each output interval is split into equal steps no longer than the
/// effective `dt`, so every requested time is hit exactly. A resumed run
/// returns only the snapshots produced after the resume point.
pub fn evolve_observed(
    start: Start<'_>,
    spec: &CoefficientSpec,
    cfg: &SolverConfig,
    observer: &mut dyn Observer,
) -> Trajectory {
    let (grid, mut state, fresh) = match start {
        Start::Initial(phi) => (phi.grid().clone(), RunState::initial(phi), true),
        Start::Resume { grid, state } => (grid, state, false),
    };
    let n = grid.n();
    let lambda = forcing::mean(spec);
    let dt = effective_dt(spec, cfg);
    let targets = cfg.output_times();
    let mut stepper = Stepper::new(grid.clone(), cfg);
    let mut snapshots = Vec::new();
    let mut scalars = Vec::new();
    let mut status = RunStatus::Completed;
    let mut next = vec![0.0; n];

    let current = |u: &[f64]| Field::from_physical(grid.clone(), u.to_vec());

    let first = current(&state.u);
    let mut peak_h1 = diagnostics::sobolev_norm(&first, 1.0);
    let mut peak_amplitude = first.max_abs();
    if fresh {
        let edge = state.u[0].abs().max(state.u[n - 1].abs());
        if edge > EDGE_WARN {
            warn!("initial data is {edge:e} at the box edge; periodization error is not negligible");
        }
        scalars.push(scalar_record(&first, 0.0, spec, cfg.k, lambda));
        observer.on_snapshot(0.0, &first);
        snapshots.push(Snapshot { t: 0.0, field: first });
    }

    'outer: while state.segment < targets.len() {
        let seg_start = if state.segment == 0 { 0.0 } else { targets[state.segment - 1] };
        let seg_end = targets[state.segment];
        let m = steps_in(seg_end - seg_start, dt);
        let h = (seg_end - seg_start) / m as f64;
        while state.step_in_segment < m {
            let t = seg_start + state.step_in_segment as f64 * h;
            stepper.advance(&state.u, t, h, spec, &mut next);
            std::mem::swap(&mut state.u, &mut next);
            state.step_in_segment += 1;
            state.steps_taken += 1;
            let landed = state.step_in_segment == m;
            state.t = if landed { seg_end } else { seg_start + state.step_in_segment as f64 * h };

            if state.u.iter().any(|v| !v.is_finite()) {
                status = RunStatus::NanDetected { t: state.t };
                break 'outer;
            }
            let h1 = diagnostics::sobolev_norm_coeffs(&grid, stepper.last_spectral(), 1.0);
            let amplitude = state.u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            peak_h1 = peak_h1.max(h1);
            peak_amplitude = peak_amplitude.max(amplitude);
            if let Some(trigger) = growth_trigger(h1, amplitude, state.initial_h1, cfg) {
                scalars.push(scalar_record(&current(&state.u), state.t, spec, cfg.k, lambda));
                status = RunStatus::BlowupDetected { t: state.t, trigger };
                break 'outer;
            }
            let at_end = landed && state.segment + 1 == targets.len();
            if state.steps_taken % cfg.conserve_check_every == 0 || at_end {
                scalars.push(scalar_record(&current(&state.u), state.t, spec, cfg.k, lambda));
            }
            if landed {
                let field = current(&state.u);
                observer.on_snapshot(state.t, &field);
                snapshots.push(Snapshot { t: state.t, field });
                state.segment += 1;
                state.step_in_segment = 0;
            }
            if observer.on_step(&state).is_break() {
                if !(landed && state.segment == targets.len()) {
                    status = RunStatus::Interrupted { t: state.t };
                }
                break 'outer;
            }
            if landed {
                continue 'outer;
            }
        }
    }

    Trajectory {
        grid,
        snapshots,
        scalars,
        status,
        dt,
        peak_h1,
        peak_amplitude,
        steps: state.steps_taken,
    }
}
