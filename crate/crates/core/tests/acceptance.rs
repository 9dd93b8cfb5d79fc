//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per
//! criterion and exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use oscillakdv::diagnostics::{self, NormSpec};
use oscillakdv::dynamics::{evolve_observed, Observer, RunState, Start};
use oscillakdv::experiments::{
    averaging_sweep, dichotomy_experiment, gaussian, solitary_profile, solitary_wave, DichotomyParams, OmegaChoice,
};
use oscillakdv::spectral::airy_propagate;
use oscillakdv::{evolve, make_grid, CoefficientSpec, Field, Scheme, SolverConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn l2_diff(a: &Field, b: &Field) -> f64 {
    diagnostics::sobolev_norm(&a.sub(b), 0.0)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Gaussian of width 2 scaled to `‖φ‖_{H¹} = 0.5` on `L = 32`, `n = 512`.
fn half_unit_gaussian() -> Field {
    let grid = make_grid(512, 32.0).unwrap();
    let unit = gaussian(&grid, 1.0, 2.0, 0.0);
    let a = 0.5 / diagnostics::sobolev_norm(&unit, 1.0);
    gaussian(&grid, a, 2.0, 0.0)
}

fn airy_exactness() -> Outcome {
    let start = Instant::now();
    let grid = make_grid(256, 64.0 * PI).unwrap();
    let phi = gaussian(&grid, 1.0, 1.0, 0.0);
    let cfg = SolverConfig::new(5, Scheme::Etdrk4, 1e-3, 1.0).with_uniform_snapshots(10);
    let traj = evolve(&phi, &CoefficientSpec::constant(0.0), &cfg);
    let err = traj
        .snapshots
        .iter()
        .map(|s| s.field.sub(&airy_propagate(&phi, s.t)).max_abs())
        .fold(0.0, f64::max);
    let wall = secs(start.elapsed());
    outcome(
        traj.status.is_completed() && traj.snapshots.len() == 11 && err < 1e-11 && wall < 5.0,
        format!("max error {err:.2e} (< 1e-11), {} snapshots, {wall:.2}s (< 5s)", traj.snapshots.len()),
    )
}

fn scheme_order() -> Outcome {
    let start = Instant::now();
    let grid = make_grid(512, 16.0 * PI).unwrap();
    let phi = gaussian(&grid, 1.3, 0.7, 0.0);
    let dts = [4e-4, 2e-4, 1e-4, 5e-5];
    let mut finest = Vec::new();
    let mut pass = true;
    let mut detail = String::new();
    for scheme in [Scheme::IfRk4, Scheme::Etdrk4] {
        let finals: Vec<Field> = dts
            .iter()
            .map(|&dt| {
                let traj = evolve(&phi, &CoefficientSpec::constant(1.0), &SolverConfig::new(5, scheme, dt, 0.1));
                traj.last().unwrap().field.clone()
            })
            .collect();
        let diffs: Vec<f64> = finals.windows(2).map(|w| l2_diff(&w[0], &w[1])).collect();
        let slopes: Vec<f64> = diffs.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
        pass &= slopes.iter().all(|&s| s >= 3.9);
        detail += &format!("{scheme:?} slopes {:.3}/{:.3}; ", slopes[0], slopes[1]);
        finest.push(finals[3].clone());
    }
    let cross = l2_diff(&finest[0], &finest[1]);
    let wall = secs(start.elapsed());
    pass &= cross < 1e-8 && wall < 120.0;
    detail += &format!("cross-scheme L2 {cross:.2e} (< 1e-8), {wall:.1}s");
    outcome(pass, detail)
}

fn mass_under_oscillation() -> Outcome {
    let phi = half_unit_gaussian();
    let spec = CoefficientSpec::cosine(2.0 * PI).unwrap().with_frequency(50.0, 0.0);
    let traj = evolve(&phi, &spec, &SolverConfig::new(5, Scheme::Etdrk4, 1e-4, 1.0));
    let drift = traj.mass_drift();
    outcome(
        traj.status.is_completed() && drift < 1e-8,
        format!("relative mass drift {drift:.2e} (< 1e-8) over {} steps", traj.steps),
    )
}

fn energy_constant_coefficient() -> Outcome {
    let phi = half_unit_gaussian();
    let traj = evolve(
        &phi,
        &CoefficientSpec::constant(1.0),
        &SolverConfig::new(5, Scheme::Etdrk4, 1e-4, 1.0),
    );
    let drift = traj.energy_drift();
    outcome(
        traj.status.is_completed() && drift < 1e-6,
        format!("relative energy drift {drift:.2e} (< 1e-6)"),
    )
}

fn traveling_wave_residual(phi: &Field, c: f64, k: i32) -> f64 {
    use oscillakdv::spectral::derivative;
    let d1 = derivative(phi, 1).into_physical_values();
    let d3 = derivative(phi, 3).into_physical_values();
    let pow = Field::from_physical(
        phi.grid().clone(),
        phi.physical_values().iter().map(|v| v.powi(k + 1)).collect(),
    );
    let dp = derivative(&pow, 1).into_physical_values();
    (0..d1.len()).map(|j| (-c * d1[j] + d3[j] + dp[j]).abs()).fold(0.0, f64::max)
}

fn solitary_fidelity() -> Outcome {
    let grid = make_grid(4096, 32.0 * PI).unwrap();
    let phi = solitary_wave(1.0, 5, &grid).unwrap();
    let residual = traveling_wave_residual(&phi, 1.0, 5);
    let traj = evolve(
        &phi,
        &CoefficientSpec::constant(1.0),
        &SolverConfig::new(5, Scheme::Etdrk4, 5e-4, 5.0),
    );
    let last = traj.last().unwrap();
    let exact = Field::from_fn(grid.clone(), |x| solitary_profile(1.0, 5, x - last.t));
    let err = l2_diff(&last.field, &exact);
    outcome(
        residual < 1e-8 && traj.status.is_completed() && last.t == 5.0 && err < 1e-4,
        format!("profile residual {residual:.2e} (< 1e-8), L2 error at t = 5: {err:.2e} (< 1e-4)"),
    )
}

fn scaling_equivalence() -> Outcome {
    let grid = make_grid(256, 16.0 * PI).unwrap();
    let phi = gaussian(&grid, 1.0, 1.0, 0.0);
    let m: f64 = 0.5;
    let k = 5;
    let mut worst = 0.0_f64;
    for scheme in [Scheme::IfRk4, Scheme::Etdrk4] {
        let cfg = SolverConfig::new(k, scheme, 1e-3, 0.5).with_uniform_snapshots(10);
        let direct = evolve(&phi, &CoefficientSpec::constant(m), &cfg);
        let scaled = evolve(&phi.scale(m.powf(1.0 / k as f64)), &CoefficientSpec::constant(1.0), &cfg);
        for (a, b) in direct.snapshots.iter().zip(&scaled.snapshots) {
            worst = worst.max(a.field.sub(&b.field.scale(m.powf(-1.0 / k as f64))).max_abs());
        }
    }
    outcome(worst < 1e-12, format!("max snapshot mismatch {worst:.2e} (< 1e-12), both schemes"))
}

struct SweepOutcomes {
    convergence: Outcome,
    uniformity: Outcome,
    thread_independence: (bool, String),
}

fn averaging_sweeps() -> SweepOutcomes {
    let phi = half_unit_gaussian();
    let spec = CoefficientSpec::cosine(2.0 * PI).unwrap();
    let omegas = [10.0, 20.0, 40.0, 80.0, 160.0];
    let phase_step = 2.0 * PI / 160.0 / 5.0;
    let t0s: Vec<f64> = (0..5).map(|j| j as f64 * phase_step).collect();
    let cfg = SolverConfig::new(5, Scheme::Etdrk4, 1e-3, 1.0);

    let start = Instant::now();
    let serial = averaging_sweep(&phi, &spec, &omegas, &t0s, 1.0, &cfg, Some(1)).unwrap();
    let serial_wall = secs(start.elapsed());
    let start = Instant::now();
    let pooled = averaging_sweep(&phi, &spec, &omegas, &t0s, 1.0, &cfg, Some(4)).unwrap();
    let pooled_wall = secs(start.elapsed());

    let errs: Vec<f64> = serial.rows_at(0.0).map(|r| r.err_h1_sup).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0] * 1.1);
    let ratio = errs[4] / errs[0];
    let rate = serial.rates_by_t0[0].1.slope;
    let all_done = serial.rows.iter().all(|r| r.status.is_completed());
    let convergence = outcome(
        all_done
            && decreasing
            && ratio <= 0.1
            && rate.is_some_and(|r| r <= -0.8)
            && serial_wall < 600.0
            && pooled_wall < 180.0,
        format!(
            "err_h1_sup {:?}, err(160)/err(10) = {ratio:.3} (<= 0.1), fitted rate {:.3} (<= -0.8), \
             {serial_wall:.1}s serial (< 600s), {pooled_wall:.1}s with 4 workers (< 180s)",
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            rate.unwrap_or(f64::NAN)
        ),
    );

    let at_top: Vec<f64> = serial.rows.iter().filter(|r| r.omega == 160.0).map(|r| r.err_h1_sup).collect();
    let max = at_top.iter().cloned().fold(f64::MIN, f64::max);
    let min = at_top.iter().cloned().fold(f64::MAX, f64::min);
    let uniformity = outcome(
        at_top.len() == 5 && min > 0.0 && max / min <= 3.0,
        format!("omega = 160 over 5 phases: max/min err_h1_sup = {:.3} (<= 3)", max / min),
    );

    let same = serial.rows.len() == pooled.rows.len()
        && serial.rows.iter().zip(&pooled.rows).all(|(a, b)| {
            a.omega == b.omega
                && a.t0 == b.t0
                && a.err_h1_sup.to_bits() == b.err_h1_sup.to_bits()
                && a.err_xt.to_bits() == b.err_xt.to_bits()
                && a.mass_drift.to_bits() == b.mass_drift.to_bits()
                && a.status == b.status
        })
        && serial.config_digest == pooled.config_digest;
    SweepOutcomes {
        convergence,
        uniformity,
        thread_independence: (same, format!("{} sweep rows identical for 1 and 4 workers: {same}", serial.rows.len())),
    }
}

fn dichotomy() -> (Outcome, Outcome) {
    let grid = make_grid(4096, 64.0).unwrap();
    let phi = solitary_wave(1.0, 5, &grid).unwrap().scale(1.1);
    let cfg = SolverConfig::new(5, Scheme::Etdrk4, 1e-4, 2.0);
    let mut params = DichotomyParams::new(
        0.2,
        4.0,
        OmegaChoice::RelativeToGrowth(0.5),
        OmegaChoice::RelativeToGrowth(100.0),
    );
    params.large_horizon_factor = 2.0;
    let rep = dichotomy_experiment(&phi, &params, &cfg).unwrap();

    let lin = &rep.linear;
    let linear = outcome(
        lin.status.is_completed() && lin.max_error_vs_airy < 1e-10 && lin.tail.value.is_finite(),
        format!(
            "omega = {:.4}, t0 = {:.4}, window {:.4}: max |u - S(t)phi| = {:.2e} (< 1e-10); \
             Strichartz tail on [{:.4}, {:.1}] = {:.4e}",
            lin.omega, lin.t0, lin.window, lin.max_error_vs_airy, lin.tail.start, lin.tail.horizon, lin.tail.value
        ),
    );

    let Some(t_star) = rep.reference.growth_time else {
        return (
            linear,
            outcome(false, "no growth detected for the g = 1 reference run; blow-up hypothesis unmet".into()),
        );
    };
    let small = rep.small_omega.as_ref().unwrap();
    let large = rep.large_omega.as_ref().unwrap();
    let gap = rep.small_vs_reference_gap.unwrap_or(f64::INFINITY);
    let pass = small.omega * t_star < params.eps
        && gap <= 0.05
        && large.omega >= 100.0 * params.eps / t_star * (1.0 - 1e-12)
        && large.status.is_completed()
        && large.t_end >= 2.0 * t_star * (1.0 - 1e-12)
        && large.peak_h1_ratio < 2.0;
    let growth = outcome(
        pass,
        format!(
            "T* = {t_star:.5}; small omega {:.4}: T = {:?}, gap {gap:.2e} (<= 0.05); \
             large omega {:.2}: {} to t = {:.4}, peak H1 ratio {:.4} (< 2)",
            small.omega,
            small.growth_time,
            large.omega,
            large.status.label(),
            large.t_end,
            large.peak_h1_ratio
        ),
    );
    (linear, growth)
}

fn diagnostics_oracles() -> Outcome {
    let grid = make_grid(256, 20.0).unwrap();
    let phi = gaussian(&grid, 0.8, 1.5, 0.0);
    let cfg = SolverConfig {
        snapshot_times: vec![0.0, 0.03, 0.1, 0.12, 0.2, 0.31, 0.4],
        ..SolverConfig::new(5, Scheme::Etdrk4, 1e-3, 0.4)
    };
    let traj = evolve(&phi, &CoefficientSpec::cosine(2.0 * PI).unwrap().with_frequency(7.0, 0.0), &cfg);
    let l2l2 = diagnostics::mixed_norm(&traj, 2.0, 2.0, 0).unwrap();
    let integrated: f64 = traj
        .snapshots
        .windows(2)
        .map(|w| 0.5 * (w[1].t - w[0].t) * (diagnostics::mass(&w[0].field) + diagnostics::mass(&w[1].field)))
        .sum();
    let fubini = (l2l2 - integrated.sqrt()).abs() / integrated.sqrt();

    let c = 0.7;
    let t_end = 1.5;
    let flat_cfg = SolverConfig::new(5, Scheme::IfRk4, 0.1, t_end).with_uniform_snapshots(6);
    let flat = evolve(&Field::from_fn(grid.clone(), |_| c), &CoefficientSpec::constant(1.0), &flat_cfg);
    let mut closed = 0.0_f64;
    for (p, q) in [(2.0, 2.0), (5.0, 10.0), (4.0, 1.0), (1.0, 3.0)] {
        let got = diagnostics::mixed_norm(&flat, p, q, 0).unwrap();
        let want = c * grid.domain_length().powf(1.0 / p) * t_end.powf(1.0 / q);
        closed = closed.max((got - want).abs() / want);
    }

    let l2_vs_mass = traj
        .snapshots
        .iter()
        .map(|s| {
            let a = diagnostics::sobolev_norm(&s.field, 0.0);
            let b = diagnostics::mass(&s.field).sqrt();
            (a - b).abs() / b
        })
        .fold(0.0, f64::max);
    let h0 = diagnostics::norm_of(&traj.snapshots, NormSpec::L2).is_ok();
    outcome(
        fubini < 1e-10 && closed < 1e-10 && l2_vs_mass < 1e-14 && h0,
        format!(
            "Fubini rel {fubini:.2e} (< 1e-10), constant-field closed form rel {closed:.2e} (< 1e-10), \
             |H^0 - sqrt(mass)| rel {l2_vs_mass:.2e}"
        ),
    )
}

struct Capture(Option<RunState>, u64);

impl Observer for Capture {
    fn on_step(&mut self, state: &RunState) -> ControlFlow<()> {
        if state.steps_taken == self.1 {
            self.0 = Some(state.clone());
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }
}

fn resume_determinism() -> (bool, String) {
    let grid = make_grid(256, 16.0 * PI).unwrap();
    let phi = gaussian(&grid, 1.2, 1.0, 0.0);
    let spec = CoefficientSpec::cosine(2.0 * PI).unwrap().with_frequency(30.0, 0.4);
    let mut ok = true;
    for scheme in [Scheme::IfRk4, Scheme::Etdrk4] {
        let cfg = SolverConfig::new(5, scheme, 1e-3, 0.5).with_uniform_snapshots(7);
        let full = evolve(&phi, &spec, &cfg);
        let mut cap = Capture(None, 137);
        let _ = evolve_observed(Start::Initial(&phi), &spec, &cfg, &mut cap);
        let state = cap.0.expect("interrupted state");
        let rest = evolve_observed(Start::Resume { grid: grid.clone(), state }, &spec, &cfg, &mut ());
        let a = full.last().unwrap().field.physical_values().into_owned();
        let b = rest.last().unwrap().field.physical_values().into_owned();
        ok &= rest.status.is_completed() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
        let tail = &full.snapshots[full.snapshots.len() - rest.snapshots.len()..];
        ok &= tail.iter().zip(&rest.snapshots).all(|(x, y)| {
            x.t == y.t && x.field.physical_values() == y.field.physical_values()
        });
    }
    (ok, format!("resume after 137 steps bitwise equal for both schemes: {ok}"))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |i: usize, name: &'static str, o: Outcome| {
        println!("{} [{i:>2}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((i, name, o));
    };
    record(1, "airy exactness", airy_exactness());
    record(2, "scheme order", scheme_order());
    record(3, "mass conservation under oscillation", mass_under_oscillation());
    record(4, "energy conservation, constant coefficient", energy_constant_coefficient());
    record(5, "solitary-wave fidelity", solitary_fidelity());
    record(6, "scaling equivalence", scaling_equivalence());
    let sweeps = averaging_sweeps();
    record(7, "averaging convergence", sweeps.convergence);
    record(8, "phase uniformity", sweeps.uniformity);
    let (linear, growth) = dichotomy();
    record(9, "dichotomy linear branch", linear);
    record(10, "dichotomy growth branches", growth);
    record(11, "diagnostics oracles", diagnostics_oracles());
    let (resume_ok, resume_detail) = resume_determinism();
    let (threads_ok, threads_detail) = sweeps.thread_independence;
    record(
        12,
        "determinism and resume",
        outcome(resume_ok && threads_ok, format!("{resume_detail}; {threads_detail}")),
    );

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
