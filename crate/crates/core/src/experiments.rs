//! Studies built on top of [`evolve`]: the averaging limit `ω → ∞`, its
//! uniformity in the phase `t₀`, and the small/large-frequency dichotomy for
//! the step coefficient.

use std::sync::Arc;

use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{self, NormSpec, StrichartzTail};
use crate::dynamics::{evolve, RunStatus, SolverConfig, Trajectory};
use crate::error::{Error, Result};
use crate::forcing::{self, CoefficientSpec};
use crate::spectral::{airy_propagate, Field, Grid1D};

/// Snapshot count used by sweeps when the caller supplies none on `[0, T]`.
pub const DEFAULT_SWEEP_SNAPSHOTS: usize = 50;

/// Solitary waves must have decayed below this at the box edges.
const EDGE_DECAY: f64 = 1e-12;

/// `A·exp(-((x - x_c)/w)²)`.
pub fn gaussian(grid: &Arc<Grid1D>, amplitude: f64, width: f64, center: f64) -> Field {
    Field::from_fn(grid.clone(), |x| {
        let r = (x - center) / width;
        amplitude * (-r * r).exp()
    })
}

/// Closed-form profile of the traveling wave `φ(x − ct)` of
/// `u_t + u_xxx + ∂x(u^{k+1}) = 0`:
/// `φ(x) = [c(k+2)/2 · sech²(k√c·x/2)]^{1/k}`, centered at `x = 0`.
pub fn solitary_profile(c: f64, k: u32, x: f64) -> f64 {
    let kf = k as f64;
    let sech = 1.0 / (0.5 * kf * c.sqrt() * x).cosh();
    (0.5 * c * (kf + 2.0) * sech * sech).powf(1.0 / kf)
}

pub fn solitary_wave(c: f64, k: u32, grid: &Arc<Grid1D>) -> Result<Field> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("wave speed c = {c} must be positive")));
    }
    if k == 0 {
        return Err(Error::Config("solitary wave needs k >= 1".into()));
    }
    let field = Field::from_fn(grid.clone(), |x| solitary_profile(c, k, x));
    let values = field.physical_values();
    let edge = values[0].max(values[grid.n() - 1]);
    if edge >= EDGE_DECAY {
        return Err(Error::Config(format!(
            "solitary wave (c = {c}, k = {k}) is {edge:e} at the box edge; enlarge the domain"
        )));
    }
    drop(values);
    Ok(field)
}

/// Evolve with the constant coefficient `m(g)`.
pub fn solve_limiting(phi: &Field, spec: &CoefficientSpec, cfg: &SolverConfig) -> Trajectory {
    evolve(phi, &CoefficientSpec::constant(forcing::mean(spec)), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: Option<f64>,
    pub used: usize,
    pub excluded: usize,
}

/// Least-squares slope of `log err` against `log ω`. Rows with a
/// nonpositive or non-finite error are dropped; fewer than three usable
/// rows give no fit.
pub fn fit_rate(rows: &[(f64, f64)]) -> RateFit {
    let usable: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(w, e)| *w > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(w, e)| (w.ln(), e.ln()))
        .collect();
    let excluded = rows.len() - usable.len();
    if usable.len() < 3 {
        return RateFit {
            slope: None,
            used: usable.len(),
            excluded,
        };
    }
    let m = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = usable.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = usable.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    RateFit {
        slope: (sxx > 0.0).then(|| sxy / sxx),
        used: usable.len(),
        excluded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega: f64,
    pub t0: f64,
    /// `max_t ‖u − U‖_{H¹}` over the shared snapshots (∞ if `u` stopped early).
    pub err_h1_sup: f64,
    pub err_xt: f64,
    pub mass_drift: f64,
    pub status: RunStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Rate at the first phase that admits a fit.
    pub fitted_rate: Option<f64>,
    pub rates_by_t0: Vec<(f64, RateFit)>,
    pub config_digest: String,
    pub dt: f64,
    pub horizon: f64,
    pub snapshot_count: usize,
}

impl SweepResult {
    pub const CSV_HEADER: [&'static str; 6] = ["omega", "t0", "err_h1_sup", "err_xt", "mass_drift", "status"];

    pub fn rows_at(&self, t0: f64) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.t0 == t0)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                format!("{:e}", r.omega),
                format!("{:e}", r.t0),
                format!("{:e}", r.err_h1_sup),
                format!("{:e}", r.err_xt),
                format!("{:e}", r.mass_drift),
                r.status.label().to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Solver settings shared by every run of a sweep on `[0, horizon]`.
pub fn sweep_config(spec: &CoefficientSpec, omegas: &[f64], horizon: f64, cfg: &SolverConfig) -> SolverConfig {
    let mut shared = cfg.clone();
    shared.t_end = horizon;
    let usable = cfg.snapshot_times.iter().filter(|&&t| t > 0.0 && t <= horizon).count();
    if usable < 2 {
        shared = shared.with_uniform_snapshots(DEFAULT_SWEEP_SNAPSHOTS);
    } else {
        shared.snapshot_times.retain(|&t| t <= horizon);
    }
    let fastest = omegas.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    shared.dt = shared
        .dt
        .min(spec.with_frequency(fastest, 0.0).resolution_dt(crate::dynamics::STEPS_PER_OSCILLATION))
        .min(horizon);
    shared
}

fn digest(parts: &str) -> String {
    let hash = Sha256::digest(parts.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn field_digest(f: &Field) -> String {
    let mut h = Sha256::new();
    for v in f.physical_values().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn sweep_row(phi: &Field, spec: &CoefficientSpec, omega: f64, t0: f64, cfg: &SolverConfig, limit: &Trajectory) -> Result<SweepRow> {
    let run = evolve(phi, &spec.with_frequency(omega, t0), cfg);
    let (err_h1_sup, err_xt) = if run.status.is_completed() {
        let diff = diagnostics::difference(&run, limit)?;
        (
            diagnostics::norm_of(&diff, NormSpec::HSobolev { s: 1.0 })?,
            diagnostics::norm_of(&diff, NormSpec::XtFull)?,
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(SweepRow {
        omega,
        t0,
        err_h1_sup,
        err_xt,
        mass_drift: run.mass_drift(),
        status: run.status,
    })
}

#[cfg(feature = "parallel")]
fn run_jobs<F>(jobs: &[(f64, f64)], threads: Option<usize>, f: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, f64) -> Result<SweepRow> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Experiment(format!("cannot start worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(|&(w, t0)| f(w, t0)).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_jobs<F>(jobs: &[(f64, f64)], _threads: Option<usize>, f: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, f64) -> Result<SweepRow> + Sync,
{
    jobs.iter().map(|&(w, t0)| f(w, t0)).collect()
}

/// Compare `u_{ω,t₀}` against the limiting solution `U` on `[0, horizon]`
/// for every `(ω, t₀)` pair. `threads = None` uses every available core.
pub fn averaging_sweep(
    phi: &Field,
    spec: &CoefficientSpec,
    omegas: &[f64],
    t0s: &[f64],
    horizon: f64,
    cfg: &SolverConfig,
    threads: Option<usize>,
) -> Result<SweepResult> {
    if omegas.len() < 3 {
        return Err(Error::Experiment("a sweep needs at least three frequencies".into()));
    }
    if omegas.iter().any(|w| !(*w > 0.0)) || omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Experiment("frequencies must be positive and increasing".into()));
    }
    if t0s.is_empty() {
        return Err(Error::Experiment("at least one phase t0 is required".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Experiment(format!("horizon {horizon} must be positive")));
    }
    let shared = sweep_config(spec, omegas, horizon, cfg);
    let limit = solve_limiting(phi, spec, &shared);
    if !limit.status.is_completed() {
        let when = match limit.status {
            RunStatus::BlowupDetected { t, .. } | RunStatus::NanDetected { t } | RunStatus::Interrupted { t } => t,
            RunStatus::Completed => horizon,
        };
        return Err(Error::Experiment(format!(
            "limiting run stopped ({}) at t = {when}; choose a horizon below that",
            limit.status.label()
        )));
    }
    info!(
        "sweep: {} runs, dt = {:e}, {} snapshots",
        omegas.len() * t0s.len(),
        shared.dt,
        shared.output_times().len() + 1
    );

    let jobs: Vec<(f64, f64)> = omegas
        .iter()
        .flat_map(|&w| t0s.iter().map(move |&t0| (w, t0)))
        .collect();
    let mut rows = run_jobs(&jobs, threads, |w, t0| sweep_row(phi, spec, w, t0, &shared, &limit))?;
    rows.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.t0.total_cmp(&b.t0)));

    let mut phases: Vec<f64> = t0s.to_vec();
    phases.dedup();
    let rates_by_t0: Vec<(f64, RateFit)> = phases
        .iter()
        .map(|&t0| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.t0 == t0 && r.status.is_completed())
                .map(|r| (r.omega, r.err_h1_sup))
                .collect();
            (t0, fit_rate(&pts))
        })
        .collect();
    let fitted_rate = rates_by_t0.iter().find_map(|(_, f)| f.slope);
    let config_digest = digest(&format!(
        "{shared:?}|{spec:?}|{omegas:?}|{t0s:?}|{horizon:e}|{}|{:?}",
        field_digest(phi),
        phi.grid()
    ));

    Ok(SweepResult {
        rows,
        fitted_rate,
        rates_by_t0,
        config_digest,
        dt: shared.dt,
        horizon,
        snapshot_count: limit.snapshots.len(),
    })
}

/// How a dichotomy branch picks its frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum OmegaChoice {
    Absolute(f64),
    /// `ω = factor · ε / T*`, with `T*` the reference growth time.
    RelativeToGrowth(f64),
}

impl OmegaChoice {
    fn resolve(&self, eps: f64, growth: Option<f64>) -> Option<f64> {
        match *self {
            OmegaChoice::Absolute(w) => Some(w),
            OmegaChoice::RelativeToGrowth(f) => growth.map(|t| f * eps / t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct DichotomyParams {
    pub eps: f64,
    pub period: f64,
    pub omega_small: OmegaChoice,
    pub omega_large: OmegaChoice,
    /// Large-ω run length in units of the reference growth time.
    #[serde(default = "default_large_horizon")]
    pub large_horizon_factor: f64,
    /// Window `T` of the phase-shifted linear branch; defaults to `T*`
    /// (or `t_end` without growth).
    #[serde(default)]
    pub linear_window: Option<f64>,
    /// Extra time beyond `T` covered by the Strichartz tail certificate.
    #[serde(default = "default_tail_span")]
    pub tail_span: f64,
}

fn default_large_horizon() -> f64 {
    10.0
}

fn default_tail_span() -> f64 {
    50.0
}

impl DichotomyParams {
    pub fn new(eps: f64, period: f64, omega_small: OmegaChoice, omega_large: OmegaChoice) -> Self {
        Self {
            eps,
            period,
            omega_small,
            omega_large,
            large_horizon_factor: default_large_horizon(),
            linear_window: None,
            tail_span: default_tail_span(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub omega: f64,
    pub t0: f64,
    pub t_end: f64,
    pub status: RunStatus,
    pub growth_time: Option<f64>,
    /// `max_t ‖u‖_{H¹} / ‖φ‖_{H¹}`; the Airy flow has ratio exactly 1.
    pub peak_h1_ratio: f64,
    pub steps: u64,
}

impl BranchReport {
    fn from_run(run: &Trajectory, omega: f64, t0: f64, t_end: f64, h1: f64) -> Self {
        Self {
            omega,
            t0,
            t_end,
            status: run.status,
            growth_time: run.status.growth_time(),
            peak_h1_ratio: if h1 > 0.0 { run.peak_h1 / h1 } else { 0.0 },
            steps: run.steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearBranchReport {
    pub omega: f64,
    pub t0: f64,
    pub window: f64,
    pub status: RunStatus,
    /// `max_t max_x |u − S(t)φ|` over the window's snapshots.
    pub max_error_vs_airy: f64,
    pub tail: StrichartzTail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyReport {
    pub initial_h1: f64,
    /// Whether the `g ≡ 1` run triggered the growth detector.
    pub hypothesis_met: bool,
    pub reference: BranchReport,
    pub small_omega: Option<BranchReport>,
    /// `|T_small − T*| / T*`.
    pub small_vs_reference_gap: Option<f64>,
    pub large_omega: Option<BranchReport>,
    pub linear: LinearBranchReport,
    pub notes: Vec<String>,
}

/// Run the four branches of the step-coefficient dichotomy: (a) the `g ≡ 1`
/// reference, (b) a slow frequency with `t₀ = 0`, (c) a fast frequency, and
/// (d) `ω = ε/T`, `t₀ = 1/ω`, on whose window the coefficient vanishes.
pub fn dichotomy_experiment(phi: &Field, params: &DichotomyParams, cfg: &SolverConfig) -> Result<DichotomyReport> {
    let step = CoefficientSpec::step_example(params.eps, params.period)?;
    let h1 = diagnostics::sobolev_norm(phi, 1.0);
    let mut notes = Vec::new();

    let reference_run = evolve(phi, &CoefficientSpec::constant(1.0), cfg);
    let growth = reference_run.status.growth_time();
    let reference = BranchReport::from_run(&reference_run, 0.0, 0.0, cfg.t_end, h1);
    if growth.is_none() {
        notes.push(format!(
            "reference run with g = 1 reached t = {} without triggering the growth detector; \
             the blow-up hypothesis is unmet for this datum",
            cfg.t_end
        ));
    }

    let small_omega = match params.omega_small.resolve(params.eps, growth) {
        Some(w) => {
            if let Some(ts) = growth {
                if w * ts >= params.eps {
                    notes.push(format!("small frequency {w} violates omega < eps/T* = {}", params.eps / ts));
                }
            }
            let run = evolve(phi, &step.with_frequency(w, 0.0), cfg);
            Some(BranchReport::from_run(&run, w, 0.0, cfg.t_end, h1))
        }
        None => None,
    };
    let small_vs_reference_gap = match (growth, small_omega.as_ref().and_then(|b| b.growth_time)) {
        (Some(a), Some(b)) => Some((b - a).abs() / a),
        _ => None,
    };

    let large_omega = match params.omega_large.resolve(params.eps, growth) {
        Some(w) => {
            let horizon = params.large_horizon_factor * growth.unwrap_or(cfg.t_end);
            let mut c = cfg.clone();
            c.t_end = horizon;
            c.snapshot_times.retain(|&t| t <= horizon);
            c.dt = c.dt.min(horizon);
            let run = evolve(phi, &step.with_frequency(w, 0.0), &c);
            Some(BranchReport::from_run(&run, w, 0.0, horizon, h1))
        }
        None => None,
    };

    let window = params.linear_window.unwrap_or(growth.unwrap_or(cfg.t_end));
    let omega_lin = params.eps / window;
    let t0_lin = 1.0 / omega_lin;
    let mut c = cfg.clone();
    c.t_end = window;
    c.dt = c.dt.min(window);
    c.snapshot_times = crate::dynamics::uniform_times(window, 20);
    let run = evolve(phi, &step.with_frequency(omega_lin, t0_lin), &c);
    let max_error_vs_airy = run
        .snapshots
        .iter()
        .map(|s| s.field.sub(&airy_propagate(phi, s.t)).max_abs())
        .fold(0.0, f64::max);
    let tail = diagnostics::strichartz_tail(phi, window, window + params.tail_span)?;
    let linear = LinearBranchReport {
        omega: omega_lin,
        t0: t0_lin,
        window,
        status: run.status,
        max_error_vs_airy,
        tail,
    };

    Ok(DichotomyReport {
        initial_h1: h1,
        hypothesis_met: growth.is_some(),
        reference,
        small_omega,
        small_vs_reference_gap,
        large_omega,
        linear,
        notes,
    })
}
