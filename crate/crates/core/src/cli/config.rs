//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! n = 512
//! domain_length = 201.06
//!
//! [solver]
//! k = 5
//! scheme = "etdrk4"
//! dt = 1e-3
//! t_end = 1.0
//! snapshot_count = 20
//!
//! [coefficient]
//! variant = "cosine"
//! omega = 50.0
//!
//! [initial_data]
//! kind = "gaussian"
//! amplitude = 0.2
//! width = 4.0
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::dynamics::{uniform_times, Scheme, SolverConfig};
use crate::error::{Error, Result, Violation};
use crate::experiments::{self, DichotomyParams};
use crate::forcing::CoefficientSpec;
use crate::spectral::{make_grid, DealiasPolicy, Field, Grid1D};

use super::files::SnapshotFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub n: usize,
    pub domain_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub k: u32,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Defaults to the exact rule for the configured `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dealias: Option<DealiasPolicy>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_times: Vec<f64>,
    /// Equally spaced snapshots; ignored when `snapshot_times` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_h1_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_amp_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conserve_check_every: Option<u64>,
}

fn default_scheme() -> Scheme {
    Scheme::Etdrk4
}

impl SolverSection {
    pub fn to_solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.k, self.scheme, self.dt, self.t_end);
        if let Some(d) = self.dealias {
            cfg.dealias = d;
        }
        cfg.snapshot_times = if !self.snapshot_times.is_empty() {
            self.snapshot_times.clone()
        } else if let Some(c) = self.snapshot_count.filter(|&c| c > 0) {
            uniform_times(self.t_end, c)
        } else {
            Vec::new()
        };
        if let Some(v) = self.blowup_h1_factor {
            cfg.blowup_h1_factor = v;
        }
        if let Some(v) = self.blowup_amp_max {
            cfg.blowup_amp_max = v;
        }
        if let Some(v) = self.conserve_check_every {
            cfg.conserve_check_every = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialData {
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    Solitary { c: f64 },
    FromFile { path: PathBuf },
    Zero,
}

/// Seeded white noise added on top of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthetic {
    pub noise_amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default = "default_snapshot_dir")]
    pub snapshot_dir: PathBuf,
    #[serde(default = "default_csv_path")]
    pub csv_path: PathBuf,
    /// Steps between checkpoint writes; 0 disables checkpointing.
    #[serde(default)]
    pub checkpoint_every: u64,
}

fn default_snapshot_dir() -> PathBuf {
    PathBuf::from("snapshots")
}

fn default_csv_path() -> PathBuf {
    PathBuf::from("scalars.csv")
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            snapshot_dir: default_snapshot_dir(),
            csv_path: default_csv_path(),
            checkpoint_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub omegas: Vec<f64>,
    pub t0s: Vec<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Experiment {
    Sweep(SweepSection),
    Dichotomy(DichotomyParams),
    #[default]
    None,
}

fn default_coefficient() -> CoefficientSpec {
    CoefficientSpec::constant(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridSection,
    pub solver: SolverSection,
    #[serde(default = "default_coefficient")]
    pub coefficient: CoefficientSpec,
    pub initial_data: InitialData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<Synthetic>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub experiment: Experiment,
}

/// Parse and validate a TOML configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn serialize_config(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl RunConfig {
    pub fn solver_config(&self) -> SolverConfig {
        self.solver.to_solver_config()
    }

    pub fn make_grid(&self) -> Result<Arc<Grid1D>> {
        make_grid(self.grid.n, self.grid.domain_length)
    }

    /// Every violated constraint, keyed by its path in the document.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let grid_ok = self.grid.n >= 16 && self.grid.n.is_power_of_two();
        if !grid_ok {
            v.push(Violation::new("grid.n", format!("{} is not a power of two >= 16", self.grid.n)));
        }
        if !positive(self.grid.domain_length) {
            v.push(Violation::new("grid.domain_length", "must be positive and finite"));
        }
        v.extend(self.solver_config().violations("solver."));
        if self.solver.snapshot_count == Some(0) {
            v.push(Violation::new("solver.snapshot_count", "must be at least 1"));
        }
        if let Some(DealiasPolicy::Exact { k }) = self.solver.dealias {
            if k < self.solver.k {
                v.push(Violation::new("solver.dealias.k", "must be at least solver.k"));
            }
        }
        if let Err(e) = self.coefficient.validate() {
            v.push(Violation::new("coefficient", strip_prefix(&e)));
        }

        match &self.initial_data {
            InitialData::Gaussian { amplitude, width, center } => {
                if !amplitude.is_finite() {
                    v.push(Violation::new("initial_data.amplitude", "must be finite"));
                }
                if !positive(*width) {
                    v.push(Violation::new("initial_data.width", "must be positive"));
                }
                if !center.is_finite() {
                    v.push(Violation::new("initial_data.center", "must be finite"));
                }
            }
            InitialData::Solitary { c } => {
                if !positive(*c) {
                    v.push(Violation::new("initial_data.c", "must be positive"));
                } else if grid_ok && positive(self.grid.domain_length) {
                    if let Ok(grid) = self.make_grid() {
                        if let Err(e) = experiments::solitary_wave(*c, self.solver.k, &grid) {
                            v.push(Violation::new("initial_data.c", strip_prefix(&e)));
                        }
                    }
                }
            }
            InitialData::FromFile { path } => {
                if !path.is_file() {
                    v.push(Violation::new("initial_data.path", format!("{} is not a readable file", path.display())));
                }
            }
            InitialData::Zero => {}
        }

        if let Some(s) = &self.synthetic {
            if !(s.noise_amplitude.is_finite() && s.noise_amplitude >= 0.0) {
                v.push(Violation::new("synthetic.noise_amplitude", "must be nonnegative"));
            }
        }
        if self.outputs.snapshot_dir.as_os_str().is_empty() {
            v.push(Violation::new("outputs.snapshot_dir", "must not be empty"));
        }
        if self.outputs.csv_path.as_os_str().is_empty() {
            v.push(Violation::new("outputs.csv_path", "must not be empty"));
        }

        match &self.experiment {
            Experiment::Sweep(s) => {
                if s.omegas.len() < 3 {
                    v.push(Violation::new("experiment.omegas", "needs at least three frequencies"));
                }
                if s.omegas.iter().any(|w| !positive(*w)) || s.omegas.windows(2).any(|w| w[1] <= w[0]) {
                    v.push(Violation::new("experiment.omegas", "must be positive and strictly increasing"));
                }
                if s.t0s.is_empty() || s.t0s.iter().any(|t| !t.is_finite()) {
                    v.push(Violation::new("experiment.t0s", "needs at least one finite phase"));
                }
                if !positive(s.horizon) {
                    v.push(Violation::new("experiment.horizon", "must be positive"));
                }
            }
            Experiment::Dichotomy(d) => {
                if let Err(e) = CoefficientSpec::step_example(d.eps, d.period) {
                    v.push(Violation::new("experiment.eps", strip_prefix(&e)));
                }
                if !positive(d.large_horizon_factor) {
                    v.push(Violation::new("experiment.large_horizon_factor", "must be positive"));
                }
                if d.linear_window.is_some_and(|w| !positive(w)) {
                    v.push(Violation::new("experiment.linear_window", "must be positive"));
                }
                if !positive(d.tail_span) {
                    v.push(Violation::new("experiment.tail_span", "must be positive"));
                }
            }
            Experiment::None => {}
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Build the initial field, adding seeded noise when configured.
    /// `seed` overrides the seed in the `synthetic` section.
    pub fn initial_field(&self, grid: &Arc<Grid1D>, seed: Option<u64>) -> Result<Field> {
        let base = match &self.initial_data {
            InitialData::Gaussian { amplitude, width, center } => {
                experiments::gaussian(grid, *amplitude, *width, *center)
            }
            InitialData::Solitary { c } => experiments::solitary_wave(*c, self.solver.k, grid)?,
            InitialData::FromFile { path } => {
                let snap = SnapshotFile::read(path)?;
                if snap.n() != grid.n() || snap.domain_length.to_bits() != grid.domain_length().to_bits() {
                    return Err(Error::Config(format!(
                        "{} holds a grid (n = {}, L = {}) different from the configured one",
                        path.display(),
                        snap.n(),
                        snap.domain_length
                    )));
                }
                snap.to_field()?
            }
            InitialData::Zero => Field::zeros(grid.clone()),
        };
        let Some(s) = &self.synthetic else {
            return Ok(base);
        };
        if s.noise_amplitude == 0.0 {
            return Ok(base);
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.unwrap_or(s.seed));
        let values = base
            .physical_values()
            .iter()
            .map(|v| v + s.noise_amplitude * rng.gen_range(-1.0..1.0))
            .collect();
        Ok(Field::from_physical(grid.clone(), values))
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}
