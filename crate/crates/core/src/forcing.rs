//! The periodic nonlinearity coefficient `g`, evaluated along a run as
//! `g(ω(t + t₀))`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum quadrature node count for tabulated means.
const MEAN_NODES: usize = 10_000;

/// Relative slack (in units of the period) used when classifying the
/// argument against the closed intervals of the step coefficient.
const STEP_EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum Variant {
    Constant { c: f64 },
    /// `cos(2πs/L)`.
    Cosine,
    /// `cos²(2πs/L)`.
    CosSquared,
    /// Piecewise-constant mean-zero step: 1 near `s ≡ 0`, 0 on `[1, 1+ε]`.
    StepExample { eps: f64 },
    /// Samples at `s_i = i·L/m`, linearly interpolated with wrap-around.
    Tabulated { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    #[serde(flatten)]
    pub variant: Variant,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    2.0 * PI
}

impl CoefficientSpec {
    pub fn new(variant: Variant, period: f64) -> Result<Self> {
        let spec = Self {
            variant,
            omega: 0.0,
            t0: 0.0,
            period,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            variant: Variant::Constant { c },
            omega: 0.0,
            t0: 0.0,
            period: 1.0,
        }
    }

    pub fn cosine(period: f64) -> Result<Self> {
        Self::new(Variant::Cosine, period)
    }

    pub fn cos_squared(period: f64) -> Result<Self> {
        Self::new(Variant::CosSquared, period)
    }

    pub fn step_example(eps: f64, period: f64) -> Result<Self> {
        Self::new(Variant::StepExample { eps }, period)
    }

    pub fn tabulated(samples: Vec<f64>, period: f64) -> Result<Self> {
        Self::new(Variant::Tabulated { samples }, period)
    }

    /// Same coefficient with frequency `omega` and phase `t0`.
    pub fn with_frequency(&self, omega: f64, t0: f64) -> Self {
        Self {
            omega,
            t0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad(format!("period {} must be positive", self.period));
        }
        if !(self.omega.is_finite() && self.t0.is_finite()) {
            return bad("omega and t0 must be finite".into());
        }
        match &self.variant {
            Variant::Constant { c } if !c.is_finite() => bad(format!("constant {c} is not finite")),
            Variant::StepExample { eps } => {
                let upper = (self.period - 1.0) / 2.0;
                if !(*eps > 0.0 && *eps < upper) {
                    bad(format!(
                        "step example needs 0 < eps < (period - 1)/2 = {upper}, got eps = {eps}"
                    ))
                } else if *eps >= 1.0 {
                    // [0, ε] would overlap the zero window [1, 1+ε]
                    bad(format!("step example needs eps < 1, got {eps}"))
                } else {
                    Ok(())
                }
            }
            Variant::Tabulated { samples } => {
                if samples.len() < 2 {
                    bad("tabulated coefficient needs at least 2 samples".into())
                } else if samples.iter().any(|v| !v.is_finite()) {
                    bad("tabulated samples must be finite".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.variant, Variant::Constant { .. })
    }

    /// Largest time step that samples one oscillation of `g` at least
    /// `per_period` times; infinite for constant coefficients or `ω = 0`.
    pub fn resolution_dt(&self, per_period: f64) -> f64 {
        if self.is_constant() || self.omega == 0.0 {
            f64::INFINITY
        } else {
            self.period / (self.omega.abs() * per_period)
        }
    }

    /// Value of `g` at argument `s` (not time).
    pub fn profile(&self, s: f64) -> f64 {
        let l = self.period;
        match &self.variant {
            Variant::Constant { c } => *c,
            Variant::Cosine => (2.0 * PI * s / l).cos(),
            Variant::CosSquared => (2.0 * PI * s / l).cos().powi(2),
            Variant::StepExample { eps } => step_value(s.rem_euclid(l), *eps, l),
            Variant::Tabulated { samples } => {
                let m = samples.len();
                let pos = s.rem_euclid(l) / l * m as f64;
                let i = (pos.floor() as usize).min(m - 1);
                let frac = pos - i as f64;
                let a = samples[i];
                let b = samples[(i + 1) % m];
                a + (b - a) * frac
            }
        }
    }

    /// `‖g‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match &self.variant {
            Variant::Constant { c } => c.abs(),
            Variant::Cosine | Variant::CosSquared => 1.0,
            Variant::StepExample { eps } => {
                (2.0 * eps / (self.period - 3.0 * eps)).max(1.0)
            }
            Variant::Tabulated { samples } => samples.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

fn step_value(s: f64, eps: f64, l: f64) -> f64 {
    let tol = STEP_EDGE_TOL * l;
    if s <= eps + tol || s >= l - eps - tol {
        1.0
    } else if s >= 1.0 - tol && s <= 1.0 + eps + tol {
        0.0
    } else {
        -2.0 * eps / (l - 3.0 * eps)
    }
}

/// `m(g)`: closed form for the built-in shapes, trapezoid quadrature for
/// tabulated data.
pub fn mean(spec: &CoefficientSpec) -> f64 {
    match &spec.variant {
        Variant::Constant { c } => *c,
        Variant::Cosine => 0.0,
        Variant::CosSquared => 0.5,
        Variant::StepExample { .. } => 0.0,
        Variant::Tabulated { samples } => {
            let nodes = MEAN_NODES.max(8 * samples.len());
            periodic_trapezoid(|s| spec.profile(s), spec.period, nodes) / spec.period
        }
    }
}

/// `g(ω(t + t₀))`.
pub fn eval(spec: &CoefficientSpec, t: f64) -> f64 {
    if let Variant::Constant { c } = spec.variant {
        return c;
    }
    spec.profile(spec.omega * (t + spec.t0))
}

/// Trapezoid rule over one period of a periodic integrand.
pub(crate) fn periodic_trapezoid(f: impl Fn(f64) -> f64, period: f64, nodes: usize) -> f64 {
    let h = period / nodes as f64;
    (0..nodes).map(|i| f(i as f64 * h)).sum::<f64>() * h
}
