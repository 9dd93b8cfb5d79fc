//! Periodic Fourier discretization.
//!
//! Spectral coefficients use the continuum-consistent scaling
//! `û_κ = sqrt(L)/n · Σ_j u_j e^{-iκ(x_j - x_0)}`, so that
//! `Σ_κ |û_κ|² = Σ_j |u_j|² dx` and every discrete norm approximates its
//! continuum value on the real line directly.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[-L/2, L/2)` with cached FFT plans.
pub struct Grid1D {
    n: usize,
    domain_length: f64,
    dx: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("n", &self.n)
            .field("domain_length", &self.domain_length)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid1D {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.domain_length.to_bits() == other.domain_length.to_bits()
    }
}

/// Build a grid. `n` must be a power of two no smaller than 16.
pub fn make_grid(n: usize, domain_length: f64) -> Result<Arc<Grid1D>> {
    Grid1D::new(n, domain_length).map(Arc::new)
}

impl Grid1D {
    pub fn new(n: usize, domain_length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "grid size n = {n} must be a power of two and at least 16"
            )));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::Config(format!(
                "domain length {domain_length} must be positive and finite"
            )));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let base = 2.0 * PI / domain_length;
        let wavenumbers = (0..n).map(|j| base * signed_index(j, n) as f64).collect();
        Ok(Self {
            n,
            domain_length,
            dx: domain_length / n as f64,
            wavenumbers,
            forward,
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Wavenumbers in standard FFT order; the Nyquist entry is negative.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Collocation point `j`, with `x_0 = -L/2`.
    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.domain_length + j as f64 * self.dx
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Physical samples to scaled spectral coefficients.
    pub fn forward_into(&self, physical: &[f64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(physical.len(), self.n);
        let scale = self.domain_length.sqrt() / self.n as f64;
        for (o, &p) in out.iter_mut().zip(physical) {
            *o = Complex64::new(p * scale, 0.0);
        }
        self.forward.process_with_scratch(out, scratch);
    }

    /// Spectral coefficients to physical samples (real part). `spectral` is
    /// used as workspace and left in an unspecified state.
    pub fn inverse_into(&self, spectral: &mut [Complex64], out: &mut [f64], scratch: &mut [Complex64]) {
        debug_assert_eq!(spectral.len(), self.n);
        self.inverse.process_with_scratch(spectral, scratch);
        let scale = 1.0 / self.domain_length.sqrt();
        for (o, s) in out.iter_mut().zip(spectral.iter()) {
            *o = s.re * scale;
        }
    }

    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Multiplier `e^{iκ³t}` of the Airy group. The Nyquist mode is left
    /// untouched so the map stays unitary and real-preserving.
    pub fn airy_multiplier(&self, t: f64) -> Vec<Complex64> {
        let nyq = self.nyquist_index();
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if j == nyq {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, k * k * k * t)
                }
            })
            .collect()
    }

    /// `(iκ)^order` with the Nyquist mode zeroed for `order > 0`.
    pub fn derivative_multiplier(&self, order: u32) -> Vec<Complex64> {
        let nyq = self.nyquist_index();
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if order > 0 && j == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k).powu(order)
                }
            })
            .collect()
    }

    /// `|κ|^s`; the zero and Nyquist modes are dropped for `s > 0`.
    pub fn riesz_multiplier(&self, s: f64) -> Vec<Complex64> {
        let nyq = self.nyquist_index();
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if s == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else if j == 0 || j == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(k.abs().powf(s), 0.0)
                }
            })
            .collect()
    }
}

/// Signed mode index of FFT slot `j` (Nyquist reported as `-n/2`).
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum DealiasPolicy {
    /// Alias-free for a degree `k + 1` product: keeps `|index| < n / (k + 2)`.
    Exact { k: u32 },
    /// Classical 2/3 rule: keeps `|index| < n / 3`.
    TwoThirds,
}

impl DealiasPolicy {
    /// Largest retained `|index|`.
    pub fn cutoff(&self, n: usize) -> usize {
        let divisor = match *self {
            DealiasPolicy::Exact { k } => k as usize + 2,
            DealiasPolicy::TwoThirds => 3,
        };
        // largest integer strictly below n / divisor
        n.div_ceil(divisor) - 1
    }

    /// 0/1 mask in FFT order.
    pub fn mask(&self, n: usize) -> Vec<f64> {
        let cutoff = self.cutoff(n) as i64;
        (0..n)
            .map(|j| if signed_index(j, n).abs() <= cutoff { 1.0 } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeKind {
    /// `∂_x^s` with multiplier `(iκ)^s`; `s` must be a whole number.
    Integer,
    /// `D_x^s = (-∂_x²)^{s/2}` with multiplier `|κ|^s`.
    Riesz,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Physical(Vec<f64>),
    Spectral(Vec<Complex64>),
}

/// One time slice of a real-valued solution, held in either representation.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid1D>,
    data: FieldData,
}

impl Field {
    pub fn from_physical(grid: Arc<Grid1D>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n(), "sample count must match grid");
        Self {
            grid,
            data: FieldData::Physical(values),
        }
    }

    pub fn from_spectral(grid: Arc<Grid1D>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.n(), "coefficient count must match grid");
        Self {
            grid,
            data: FieldData::Spectral(coeffs),
        }
    }

    pub fn from_fn(grid: Arc<Grid1D>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self::from_physical(grid, values)
    }

    pub fn zeros(grid: Arc<Grid1D>) -> Self {
        let n = grid.n();
        Self::from_physical(grid, vec![0.0; n])
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn data(&self) -> &FieldData {
        &self.data
    }

    pub fn is_physical(&self) -> bool {
        matches!(self.data, FieldData::Physical(_))
    }

    pub fn to_spectral(&self) -> Field {
        match &self.data {
            FieldData::Spectral(_) => self.clone(),
            FieldData::Physical(p) => {
                Field::from_spectral(self.grid.clone(), physical_to_spectral(&self.grid, p))
            }
        }
    }

    pub fn to_physical(&self) -> Field {
        match &self.data {
            FieldData::Physical(_) => self.clone(),
            FieldData::Spectral(s) => {
                Field::from_physical(self.grid.clone(), spectral_to_physical(&self.grid, s))
            }
        }
    }

    pub fn physical_values(&self) -> Cow<'_, [f64]> {
        match &self.data {
            FieldData::Physical(p) => Cow::Borrowed(p),
            FieldData::Spectral(s) => Cow::Owned(spectral_to_physical(&self.grid, s)),
        }
    }

    pub fn spectral_values(&self) -> Cow<'_, [Complex64]> {
        match &self.data {
            FieldData::Spectral(s) => Cow::Borrowed(s),
            FieldData::Physical(p) => Cow::Owned(physical_to_spectral(&self.grid, p)),
        }
    }

    pub fn into_physical_values(self) -> Vec<f64> {
        match self.data {
            FieldData::Physical(p) => p,
            FieldData::Spectral(s) => spectral_to_physical(&self.grid, &s),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.physical_values()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise `self - other` in physical space.
    pub fn sub(&self, other: &Field) -> Field {
        let a = self.physical_values();
        let b = other.physical_values();
        Field::from_physical(
            self.grid.clone(),
            a.iter().zip(b.iter()).map(|(x, y)| x - y).collect(),
        )
    }

    pub fn scale(&self, alpha: f64) -> Field {
        match &self.data {
            FieldData::Physical(p) => {
                Field::from_physical(self.grid.clone(), p.iter().map(|v| alpha * v).collect())
            }
            FieldData::Spectral(s) => {
                Field::from_spectral(self.grid.clone(), s.iter().map(|v| v * alpha).collect())
            }
        }
    }

    fn apply_multiplier(&self, multiplier: &[Complex64]) -> Field {
        let mut coeffs = self.spectral_values().into_owned();
        for (c, m) in coeffs.iter_mut().zip(multiplier) {
            *c *= m;
        }
        Field::from_spectral(self.grid.clone(), coeffs)
    }
}

fn physical_to_spectral(grid: &Grid1D, values: &[f64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); grid.n()];
    let mut scratch = vec![Complex64::default(); grid.scratch_len()];
    grid.forward_into(values, &mut out, &mut scratch);
    out
}

fn spectral_to_physical(grid: &Grid1D, coeffs: &[Complex64]) -> Vec<f64> {
    let mut work = coeffs.to_vec();
    let mut out = vec![0.0; grid.n()];
    let mut scratch = vec![Complex64::default(); grid.scratch_len()];
    grid.inverse_into(&mut work, &mut out, &mut scratch);
    out
}

pub fn to_spectral(f: &Field) -> Field {
    f.to_spectral()
}

pub fn to_physical(f: &Field) -> Field {
    f.to_physical()
}

/// Integer or Riesz derivative of order `order`, returned in spectral form.
pub fn spectral_derivative(f: &Field, order: f64, kind: DerivativeKind) -> Result<Field> {
    if !(order.is_finite() && order >= 0.0) {
        return Err(Error::Usage(format!(
            "derivative order must be a finite nonnegative number, got {order}"
        )));
    }
    let multiplier = match kind {
        DerivativeKind::Integer => {
            if order.fract() != 0.0 {
                return Err(Error::Usage(format!(
                    "integer derivative requires a whole order, got {order}"
                )));
            }
            f.grid.derivative_multiplier(order as u32)
        }
        DerivativeKind::Riesz => f.grid.riesz_multiplier(order),
    };
    Ok(f.apply_multiplier(&multiplier))
}

/// `∂_x^order` shorthand for whole orders.
pub fn derivative(f: &Field, order: u32) -> Field {
    f.apply_multiplier(&f.grid.derivative_multiplier(order))
}

/// Exact linear flow `S(t)` of `u_t + u_xxx = 0`.
pub fn airy_propagate(f: &Field, t: f64) -> Field {
    f.apply_multiplier(&f.grid.airy_multiplier(t))
}

pub fn dealias(f: &Field, policy: DealiasPolicy) -> Field {
    let mask = policy.mask(f.grid.n());
    let mut coeffs = f.spectral_values().into_owned();
    for (c, m) in coeffs.iter_mut().zip(&mask) {
        *c *= *m;
    }
    Field::from_spectral(f.grid.clone(), coeffs)
}
