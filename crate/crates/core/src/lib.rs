//! Pseudospectral solver and experiment harness for the generalized KdV
//! equation with a time-oscillating nonlinearity,
//!
//! ```text
//! u_t + u_xxx + g(ω(t + t₀)) ∂x(u^{k+1}) = 0,    x ∈ [-L/2, L/2) periodic.
//! ```
//!
//! The modules build on each other in order: [`spectral`] (grids, FFTs,
//! Fourier multipliers), [`forcing`] (the coefficient `g`), [`dynamics`]
//! (time stepping), [`diagnostics`] (norms and conserved quantities),
//! [`experiments`] (averaging sweeps and the step-coefficient dichotomy)
//! and [`cli`] (configuration files, persistence, command dispatch).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod forcing;
pub mod spectral;

pub use dynamics::{evolve, RunStatus, Scheme, SolverConfig, Trajectory};
pub use error::{Error, Result};
pub use forcing::CoefficientSpec;
pub use spectral::{make_grid, Field, Grid1D};
