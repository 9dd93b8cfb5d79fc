//! Norms and conserved quantities.
//!
//! Space integrals are rectangle sums on the periodic grid, time integrals
//! are trapezoid sums over the snapshot times, and `∞` exponents are maxima
//! over the discrete mesh (so they under-estimate the continuum supremum).

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{derivative, Field, Grid1D};

/// Default mesh spacing for [`strichartz_tail`].
pub const STRICHARTZ_TIME_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NormSpec {
    /// `L_T^∞ H^s`.
    HSobolev { s: f64 },
    /// `‖∂_x^d f‖_{L_x^p L_T^q}`; infinite exponents are written as `inf`.
    Mixed { p: f64, q: f64, derivative_order: u32 },
    XtFull,
    YtFull,
    /// `L_T^∞ L²`.
    L2,
    /// `L_x^5 L_T^{10}`.
    Strichartz510,
}

/// `∫u² dx`.
pub fn mass(u: &Field) -> f64 {
    let dx = u.grid().dx();
    u.physical_values().iter().map(|v| v * v).sum::<f64>() * dx
}

/// `∫(½u_x² − λ u^{k+2}/(k+2)) dx`; the derivative term is evaluated
/// spectrally.
pub fn energy(u: &Field, lambda: f64, k: u32) -> f64 {
    let grid = u.grid();
    let coeffs = u.spectral_values();
    let nyq = grid.nyquist_index();
    let kinetic: f64 = grid
        .wavenumbers()
        .iter()
        .zip(coeffs.iter())
        .enumerate()
        .filter(|(j, _)| *j != nyq)
        .map(|(_, (kappa, c))| kappa * kappa * c.norm_sqr())
        .sum();
    let p = k as i32 + 2;
    let potential: f64 = u.physical_values().iter().map(|v| v.powi(p)).sum::<f64>() * grid.dx();
    0.5 * kinetic - lambda * potential / p as f64
}

/// `(Σ_κ (1+κ²)^s |û_κ|²)^{1/2}`.
pub fn sobolev_norm(u: &Field, s: f64) -> f64 {
    sobolev_norm_coeffs(u.grid(), &u.spectral_values(), s)
}

pub(crate) fn sobolev_norm_coeffs(grid: &Grid1D, coeffs: &[Complex64], s: f64) -> f64 {
    grid.wavenumbers()
        .iter()
        .zip(coeffs)
        .map(|(kappa, c)| {
            let w = 1.0 + kappa * kappa;
            let weight = if s == 1.0 { w } else { w.powf(s) };
            weight * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Trapezoid weights for the node set `times`.
fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let m = times.len();
    let mut w = vec![0.0; m];
    for i in 0..m.saturating_sub(1) {
        let h = times[i + 1] - times[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// `L_x^p L_T^q` of the sampled slices `rows[i][j] = f(x_j, t_i)`.
fn mixed_from_rows(rows: &[Vec<f64>], times: &[f64], dx: f64, p: f64, q: f64) -> f64 {
    let n = rows.first().map_or(0, Vec::len);
    let scale = rows
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let weights = trapezoid_weights(times);
    let inner: Vec<f64> = (0..n)
        .map(|j| {
            if q.is_infinite() {
                rows.iter().fold(0.0_f64, |m, r| m.max(r[j].abs() / scale))
            } else {
                rows.iter()
                    .zip(&weights)
                    .map(|(r, w)| w * (r[j].abs() / scale).powf(q))
                    .sum::<f64>()
                    .powf(1.0 / q)
            }
        })
        .collect();
    let outer = if p.is_infinite() {
        inner.iter().fold(0.0_f64, |m, v| m.max(*v))
    } else {
        (inner.iter().map(|v| v.powf(p)).sum::<f64>() * dx).powf(1.0 / p)
    };
    scale * outer
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    for (name, e) in [("p", p), ("q", q)] {
        if e.is_nan() || e < 1.0 {
            return Err(Error::Usage(format!("exponent {name} = {e} must lie in [1, ∞]")));
        }
    }
    Ok(())
}

/// Mixed norm over a snapshot sequence.
pub fn mixed_norm_snapshots(snapshots: &[Snapshot], p: f64, q: f64, derivative_order: u32) -> Result<f64> {
    check_exponents(p, q)?;
    if snapshots.is_empty() || (q.is_finite() && snapshots.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "L_T^{q} needs at least two snapshots, got {}",
            snapshots.len()
        )));
    }
    let dx = snapshots[0].field.grid().dx();
    let times: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    let rows: Vec<Vec<f64>> = snapshots
        .iter()
        .map(|s| {
            if derivative_order == 0 {
                s.field.physical_values().into_owned()
            } else {
                derivative(&s.field, derivative_order).into_physical_values()
            }
        })
        .collect();
    Ok(mixed_from_rows(&rows, &times, dx, p, q))
}

/// `‖∂_x^d u‖_{L_x^p L_T^q}` over the trajectory's snapshots.
pub fn mixed_norm(traj: &Trajectory, p: f64, q: f64, derivative_order: u32) -> Result<f64> {
    mixed_norm_snapshots(&traj.snapshots, p, q, derivative_order)
}

/// One named summand of the `X_T` or `Y_T` norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormComponent {
    pub label: &'static str,
    pub value: f64,
}

fn sup_sobolev(snapshots: &[Snapshot], s: f64) -> Result<f64> {
    if snapshots.is_empty() {
        return Err(Error::InsufficientData("no snapshots".into()));
    }
    Ok(snapshots
        .iter()
        .map(|snap| sobolev_norm(&snap.field, s))
        .fold(0.0, f64::max))
}

/// The seven summands of the `X_T` norm, in the usual order.
pub fn xt_components_snapshots(s: &[Snapshot]) -> Result<Vec<NormComponent>> {
    let inf = f64::INFINITY;
    let parts: [(&'static str, Result<f64>); 7] = [
        ("LT_inf_H1", sup_sobolev(s, 1.0)),
        ("dx_Lx_inf_LT_2", mixed_norm_snapshots(s, inf, 2.0, 1)),
        ("dxx_Lx_inf_LT_2", mixed_norm_snapshots(s, inf, 2.0, 2)),
        ("Lx_5_LT_10", mixed_norm_snapshots(s, 5.0, 10.0, 0)),
        ("dx_Lx_5_LT_10", mixed_norm_snapshots(s, 5.0, 10.0, 1)),
        ("dx_Lx_20_LT_5/2", mixed_norm_snapshots(s, 20.0, 2.5, 1)),
        ("Lx_4_LT_inf", mixed_norm_snapshots(s, 4.0, inf, 0)),
    ];
    parts
        .into_iter()
        .map(|(label, v)| v.map(|value| NormComponent { label, value }))
        .collect()
}

pub fn yt_components_snapshots(s: &[Snapshot]) -> Result<Vec<NormComponent>> {
    Ok(vec![
        NormComponent {
            label: "dx_Lx_2_LT_2",
            value: mixed_norm_snapshots(s, 2.0, 2.0, 1)?,
        },
        NormComponent {
            label: "Lx_2_LT_2",
            value: mixed_norm_snapshots(s, 2.0, 2.0, 0)?,
        },
    ])
}

pub fn xt_components(traj: &Trajectory) -> Result<Vec<NormComponent>> {
    xt_components_snapshots(&traj.snapshots)
}

pub fn xt_norm(traj: &Trajectory) -> Result<f64> {
    Ok(xt_components(traj)?.iter().map(|c| c.value).sum())
}

pub fn yt_norm(traj: &Trajectory) -> Result<f64> {
    Ok(yt_components_snapshots(&traj.snapshots)?
        .iter()
        .map(|c| c.value)
        .sum())
}

/// Evaluate `norm` on a snapshot sequence.
pub fn norm_of(snapshots: &[Snapshot], norm: NormSpec) -> Result<f64> {
    match norm {
        NormSpec::HSobolev { s } => sup_sobolev(snapshots, s),
        NormSpec::L2 => sup_sobolev(snapshots, 0.0),
        NormSpec::Mixed { p, q, derivative_order } => mixed_norm_snapshots(snapshots, p, q, derivative_order),
        NormSpec::Strichartz510 => mixed_norm_snapshots(snapshots, 5.0, 10.0, 0),
        NormSpec::XtFull => Ok(xt_components_snapshots(snapshots)?.iter().map(|c| c.value).sum()),
        NormSpec::YtFull => Ok(yt_components_snapshots(snapshots)?.iter().map(|c| c.value).sum()),
    }
}

/// Snapshot-wise difference `a − b`; grids and snapshot times must agree.
pub fn difference(a: &Trajectory, b: &Trajectory) -> Result<Vec<Snapshot>> {
    if *a.grid != *b.grid {
        return Err(Error::Config(format!(
            "trajectories live on different grids ({:?} vs {:?})",
            a.grid, b.grid
        )));
    }
    if a.snapshots.len() != b.snapshots.len()
        || a.snapshots.iter().zip(&b.snapshots).any(|(x, y)| x.t != y.t)
    {
        return Err(Error::Config("trajectories have different snapshot times".into()));
    }
    Ok(a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| Snapshot {
            t: x.t,
            field: x.field.sub(&y.field),
        })
        .collect())
}

/// `‖a − b‖` in the requested norm.
pub fn traj_diff(a: &Trajectory, b: &Trajectory, norm: NormSpec) -> Result<f64> {
    norm_of(&difference(a, b)?, norm)
}

/// Finite-horizon estimate of `‖S(·)φ‖_{L_x^5 L^{10}_{(T, ∞)}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrichartzTail {
    pub start: f64,
    pub horizon: f64,
    pub time_step: f64,
    pub value: f64,
    /// The same quantity truncated at `horizon / 2` (when that exceeds `start`).
    pub half_horizon_value: Option<f64>,
}

impl StrichartzTail {
    /// Relative change between the half and full horizon values.
    pub fn horizon_sensitivity(&self) -> Option<f64> {
        self.half_horizon_value.map(|h| {
            if self.value == 0.0 {
                0.0
            } else {
                (self.value - h).abs() / self.value
            }
        })
    }
}

/// Tail Strichartz norm with the default mesh spacing.
pub fn strichartz_tail(phi: &Field, start: f64, horizon: f64) -> Result<StrichartzTail> {
    strichartz_tail_with_step(phi, start, horizon, STRICHARTZ_TIME_STEP)
}

pub fn strichartz_tail_with_step(phi: &Field, start: f64, horizon: f64, time_step: f64) -> Result<StrichartzTail> {
    if !(horizon > start) {
        return Err(Error::Usage(format!("horizon {horizon} must exceed start time {start}")));
    }
    if !(time_step > 0.0) {
        return Err(Error::Usage("time step must be positive".into()));
    }
    let value = airy_l5_l10(phi, start, horizon, time_step);
    let half = 0.5 * horizon;
    let half_horizon_value = (half > start).then(|| airy_l5_l10(phi, start, half, time_step));
    Ok(StrichartzTail {
        start,
        horizon,
        time_step,
        value,
        half_horizon_value,
    })
}

/// Mesh `{start} ∪ {iτ : start < iτ < end} ∪ {end}`, anchored at zero so
/// nested intervals share nodes.
fn anchored_mesh(start: f64, end: f64, step: f64) -> Vec<f64> {
    let mut mesh = vec![start];
    let mut i = (start / step).floor() as i64 + 1;
    loop {
        let t = i as f64 * step;
        if t >= end - 1e-12 * step {
            break;
        }
        if t > start + 1e-12 * step {
            mesh.push(t);
        }
        i += 1;
    }
    mesh.push(end);
    mesh
}

fn airy_l5_l10(phi: &Field, start: f64, end: f64, step: f64) -> f64 {
    let grid: &Arc<Grid1D> = phi.grid();
    let n = grid.n();
    let coeffs = phi.spectral_values().into_owned();
    let cubes: Vec<f64> = grid
        .wavenumbers()
        .iter()
        .enumerate()
        .map(|(j, k)| if j == grid.nyquist_index() { 0.0 } else { k * k * k })
        .collect();
    let mesh = anchored_mesh(start, end, step);
    let weights = trapezoid_weights(&mesh);
    let mut acc = vec![0.0; n];
    let mut work = vec![Complex64::default(); n];
    let mut phys = vec![0.0; n];
    let mut scratch = vec![Complex64::default(); grid.scratch_len()];
    for (t, w) in mesh.iter().zip(&weights) {
        for ((o, c), k3) in work.iter_mut().zip(&coeffs).zip(&cubes) {
            *o = c * Complex64::from_polar(1.0, k3 * t);
        }
        grid.inverse_into(&mut work, &mut phys, &mut scratch);
        for (a, u) in acc.iter_mut().zip(&phys) {
            *a += w * u.abs().powi(10);
        }
    }
    (acc.iter().map(|a| a.sqrt()).sum::<f64>() * grid.dx()).powf(0.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RunStatus;
    use crate::spectral::{airy_propagate, make_grid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn traj_from(grid: &Arc<Grid1D>, times: &[f64], f: impl Fn(f64, f64) -> f64) -> Trajectory {
        let snapshots = times
            .iter()
            .map(|&t| Snapshot {
                t,
                field: Field::from_fn(grid.clone(), |x| f(x, t)),
            })
            .collect();
        Trajectory {
            grid: grid.clone(),
            snapshots,
            scalars: Vec::new(),
            status: RunStatus::Completed,
            dt: 0.0,
            peak_h1: 0.0,
            peak_amplitude: 0.0,
            steps: 0,
        }
    }

    fn uniform(t_end: f64, m: usize) -> Vec<f64> {
        (0..=m).map(|i| t_end * i as f64 / m as f64).collect()
    }

    #[test]
    fn mass_cases() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        assert_eq!(mass(&Field::zeros(g.clone())), 0.0);
        assert!((mass(&Field::from_fn(g, f64::sin)) - PI).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mass_quadrature() {
        // ∫e^{-2x²} dx = √(π/2)
        let g = make_grid(1024, 64.0 * PI).unwrap();
        let m = mass(&Field::from_fn(g, |x| (-x * x).exp()));
        let exact = (PI / 2.0).sqrt();
        assert!(((m - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn energy_linear_part() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        assert_eq!(energy(&Field::zeros(g.clone()), 1.0, 5), 0.0);
        let e = energy(&Field::from_fn(g, f64::sin), 0.0, 5);
        assert!((e - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn sobolev_cases() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let s = Field::from_fn(g.clone(), f64::sin);
        assert!((sobolev_norm(&s, 0.0) - mass(&s).sqrt()).abs() < 1e-14);
        assert!((sobolev_norm(&s, 1.0) - (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_h1_against_fourier_integral() {
        // Oracle: ∫(1+ξ²)|ĝ(ξ)|² dξ with ĝ(ξ) = e^{-ξ²/4}/√2, by a fine
        // trapezoid in ξ.
        let g = make_grid(512, 32.0 * PI).unwrap();
        let u = Field::from_fn(g, |x| (-x * x).exp());
        let h = 1e-3;
        let quad: f64 = (-40_000..=40_000)
            .map(|i| {
                let xi = i as f64 * h;
                (1.0 + xi * xi) * 0.5 * (-xi * xi / 2.0).exp()
            })
            .sum::<f64>()
            * h;
        let got = sobolev_norm(&u, 1.0);
        assert!(((got - quad.sqrt()) / got).abs() < 1e-8);
    }

    #[test]
    fn constant_field_closed_form() {
        let l = 10.0;
        let t_end = 2.0;
        let g = make_grid(32, l).unwrap();
        let traj = traj_from(&g, &uniform(t_end, 7), |_, _| 1.0);
        for (p, q) in [(1.0, 1.0), (2.0, 2.0), (5.0, 10.0), (20.0, 2.5), (4.0, f64::INFINITY)] {
            let expect = l.powf(1.0 / p) * t_end.powf(1.0 / q);
            let got = mixed_norm(&traj, p, q, 0).unwrap();
            assert!(((got - expect) / expect).abs() < 1e-10, "p={p} q={q}: {got} vs {expect}");
        }
        assert!((mixed_norm(&traj, f64::INFINITY, f64::INFINITY, 0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fubini_identity() {
        let g = make_grid(64, 20.0).unwrap();
        let traj = traj_from(&g, &uniform(1.0, 20), |x, t| (-(x - t).powi(2)).exp() * (1.0 + t));
        let lhs = mixed_norm(&traj, 2.0, 2.0, 0).unwrap().powi(2);
        let masses: Vec<f64> = traj.snapshots.iter().map(|s| mass(&s.field)).collect();
        let w = trapezoid_weights(&traj.times());
        let rhs: f64 = masses.iter().zip(&w).map(|(m, w)| m * w).sum();
        assert!(((lhs - rhs) / rhs).abs() < 1e-10);
    }

    #[test]
    fn insufficient_snapshots() {
        let g = make_grid(16, 1.0).unwrap();
        let traj = traj_from(&g, &[0.0], |_, _| 1.0);
        assert!(matches!(mixed_norm(&traj, 2.0, 2.0, 0), Err(Error::InsufficientData(_))));
        assert!(mixed_norm(&traj, 2.0, f64::INFINITY, 0).is_ok());
        assert!(matches!(mixed_norm(&traj, 0.5, 2.0, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn xt_of_zero_and_domination() {
        let g = make_grid(64, 20.0).unwrap();
        let zero = traj_from(&g, &uniform(1.0, 4), |_, _| 0.0);
        assert_eq!(xt_norm(&zero).unwrap(), 0.0);
        assert_eq!(yt_norm(&zero).unwrap(), 0.0);
        let moving = traj_from(&g, &uniform(1.0, 10), |x, t| (-(x - 2.0 * t).powi(2)).exp());
        let parts = xt_components(&moving).unwrap();
        let total = xt_norm(&moving).unwrap();
        assert_eq!(parts.len(), 7);
        for c in &parts {
            assert!(c.value > 0.0 && c.value < total, "{c:?}");
        }
    }

    #[test]
    fn xt_components_for_static_field() {
        // f(x,t) = φ(x): L_T^q collapses to T^{1/q}|φ(x)|.
        let l = 30.0;
        let t_end = 1.5;
        let g = make_grid(256, l).unwrap();
        let phi = |x: f64| (-x * x / 2.0).exp();
        let traj = traj_from(&g, &uniform(t_end, 5), |x, _| phi(x));
        let f = Field::from_fn(g.clone(), phi);
        let parts = xt_components(&traj).unwrap();
        let l4: f64 = (f.physical_values().iter().map(|v| v.powi(4)).sum::<f64>() * g.dx()).powf(0.25);
        assert!((parts[6].value - l4).abs() < 1e-12);
        assert!((parts[0].value - sobolev_norm(&f, 1.0)).abs() < 1e-14);
        let l5: f64 = (f.physical_values().iter().map(|v| v.abs().powi(5)).sum::<f64>() * g.dx()).powf(0.2);
        assert!((parts[3].value - l5 * t_end.powf(0.1)).abs() < 1e-12);
        let dmax = derivative(&f, 1).max_abs();
        assert!((parts[1].value - dmax * t_end.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn diff_checks_meshes() {
        let g = make_grid(32, 10.0).unwrap();
        let a = traj_from(&g, &uniform(1.0, 4), |x, t| (x * t).sin());
        let b = traj_from(&g, &uniform(1.0, 5), |x, t| (x * t).sin());
        assert!(matches!(traj_diff(&a, &b, NormSpec::L2), Err(Error::Config(_))));
        let other = make_grid(64, 10.0).unwrap();
        let c = traj_from(&other, &uniform(1.0, 4), |x, t| (x * t).sin());
        assert!(matches!(traj_diff(&a, &c, NormSpec::L2), Err(Error::Config(_))));
        assert_eq!(traj_diff(&a, &a, NormSpec::XtFull).unwrap(), 0.0);
    }

    #[test]
    fn tail_of_zero_and_monotone_in_start() {
        let g = make_grid(128, 64.0 * PI).unwrap();
        let zero = Field::zeros(g.clone());
        assert_eq!(strichartz_tail(&zero, 0.0, 5.0).unwrap().value, 0.0);
        let phi = Field::from_fn(g, |x| (-x * x).exp());
        let mut last = f64::INFINITY;
        for start in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let v = strichartz_tail(&phi, start, 8.0).unwrap().value;
            assert!(v <= last, "start {start}: {v} > {last}");
            last = v;
        }
        assert!(strichartz_tail(&phi, 3.0, 2.0).is_err());
    }

    #[test]
    fn mixed_norm_self_refinement() {
        // L_x^5 L_T^10 of the Airy flow of a Gaussian on [0,1], against a
        // recomputation with doubled space and time resolution.
        let compute = |n: usize, m: usize| {
            let g = make_grid(n, 64.0 * PI).unwrap();
            let phi = Field::from_fn(g.clone(), |x| (-x * x).exp());
            let snapshots: Vec<Snapshot> = uniform(1.0, m)
                .into_iter()
                .map(|t| Snapshot { t, field: airy_propagate(&phi, t) })
                .collect();
            mixed_norm_snapshots(&snapshots, 5.0, 10.0, 0).unwrap()
        };
        let coarse = compute(512, 100);
        let fine = compute(1024, 200);
        assert!(((coarse - fine) / fine).abs() < 0.01, "{coarse} vs {fine}");
    }

    fn random_traj(g: &Arc<Grid1D>, seed: u64) -> Trajectory {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a: f64 = rng.gen_range(-2.0..2.0);
        let b: f64 = rng.gen_range(0.5..2.0);
        let c: f64 = rng.gen_range(-3.0..3.0);
        traj_from(g, &uniform(1.0, 6), move |x, t| a * (-(x - c * t).powi(2) / b).exp() + 0.1 * a * (x * b).sin())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn norms_are_homogeneous(seed in 0u64..500, alpha in -5.0f64..5.0) {
            let g = make_grid(64, 16.0).unwrap();
            let t = random_traj(&g, seed);
            let mut scaled = t.clone();
            for s in scaled.snapshots.iter_mut() {
                s.field = s.field.scale(alpha);
            }
            for norm in [NormSpec::L2, NormSpec::HSobolev { s: 1.0 }, NormSpec::XtFull, NormSpec::YtFull,
                         NormSpec::Mixed { p: 3.0, q: f64::INFINITY, derivative_order: 2 }] {
                let a = norm_of(&t.snapshots, norm).unwrap();
                let b = norm_of(&scaled.snapshots, norm).unwrap();
                prop_assert!((b - alpha.abs() * a).abs() <= 1e-12 * (1.0 + b.abs()), "{:?}: {} vs {}", norm, b, a);
            }
        }

        #[test]
        fn difference_is_a_metric(s1 in 0u64..500, s2 in 0u64..500, s3 in 0u64..500) {
            let g = make_grid(64, 16.0).unwrap();
            let (a, b, c) = (random_traj(&g, s1), random_traj(&g, s2), random_traj(&g, s3));
            for norm in [NormSpec::XtFull, NormSpec::YtFull, NormSpec::Strichartz510] {
                let ab = traj_diff(&a, &b, norm).unwrap();
                let ba = traj_diff(&b, &a, norm).unwrap();
                let bc = traj_diff(&b, &c, norm).unwrap();
                let ac = traj_diff(&a, &c, norm).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
                prop_assert!(ac <= ab + bc + 1e-12 * (1.0 + ac));
            }
        }
    }
}
