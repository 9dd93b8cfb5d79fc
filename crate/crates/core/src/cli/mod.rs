//! Command-line front end: argument parsing, subcommand dispatch and the
//! artifacts each subcommand leaves in the output directory.

pub mod config;
pub mod files;

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use serde::Serialize;

use crate::diagnostics;
use crate::dynamics::{evolve_observed, Observer, RunState, RunStatus, Snapshot, Start};
use crate::error::{Error, Result};
use crate::experiments;
use crate::forcing;
use crate::spectral::Field;

pub use config::{load_config, parse_config, serialize_config, Experiment, InitialData, RunConfig};
pub use files::{Checkpoint, SnapshotFile};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_SUMMARY: &str = "sweep_summary.json";
pub const DICHOTOMY_REPORT: &str = "dichotomy.json";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const NORMS_CSV: &str = "norms.csv";

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Completed = 0,
    Failure = 1,
    ConfigError = 2,
    GrowthDetected = 3,
    NanDetected = 4,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_status(status: &RunStatus) -> Self {
        match status {
            RunStatus::Completed => ExitKind::Completed,
            RunStatus::BlowupDetected { .. } => ExitKind::GrowthDetected,
            RunStatus::NanDetected { .. } => ExitKind::NanDetected,
            RunStatus::Interrupted { .. } => ExitKind::Failure,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Invalid(_) | Error::Parse(_) | Error::Usage(_) => ExitKind::ConfigError,
            _ => ExitKind::Failure,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oscillakdv", version, about = "gKdV with an oscillating nonlinearity: simulate, sweep, diagnose")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory receiving all artifacts.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Continue a simulation from a checkpoint file.
    #[arg(long, value_name = "PATH")]
    pub resume: Option<PathBuf>,
    /// Worker threads for sweeps (all cores when unset).
    #[arg(long, value_name = "N", env = "OSCILLAKDV_THREADS")]
    pub threads: Option<usize>,
    /// Seed for synthetic noise on the initial data.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evolve the configured datum and write snapshots and scalar diagnostics.
    Simulate(CommonArgs),
    /// Compare oscillating runs with the limiting solution over a frequency ladder.
    Sweep(CommonArgs),
    /// Run the step-coefficient dichotomy branches.
    Dichotomy(CommonArgs),
    /// Tabulate norms for an existing snapshot directory.
    Diagnose {
        #[command(flatten)]
        common: CommonArgs,
        /// Snapshot directory (defaults to the configured one under --out).
        #[arg(long, value_name = "DIR")]
        snapshots: Option<PathBuf>,
    },
}

impl Command {
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(c) | Command::Sweep(c) | Command::Dichotomy(c) => c,
            Command::Diagnose { common, .. } => common,
        }
    }
}

/// Parse, run, and map the outcome to an exit code.
pub fn main_with(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(kind) => kind.code(),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitKind::from_error(&e).code()
        }
    }
}

pub fn execute(command: &Command) -> Result<ExitKind> {
    let common = command.common();
    let cfg = load_config(&common.config)?;
    fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    match command {
        Command::Simulate(c) => simulate(&cfg, c),
        Command::Sweep(c) => sweep(&cfg, c),
        Command::Dichotomy(c) => dichotomy(&cfg, c),
        Command::Diagnose { common, snapshots } => {
            let dir = snapshots
                .clone()
                .unwrap_or_else(|| common.out.join(&cfg.outputs.snapshot_dir));
            diagnose(&cfg, &dir, &common.out)
        }
    }
}

/// Digest of the settings that must agree between a run and its resumption.
pub fn run_digest(cfg: &RunConfig) -> u64 {
    let key = serde_json::to_string(&(&cfg.grid, &cfg.solver, &cfg.coefficient)).expect("config serializes");
    files::digest_u64(key.as_bytes())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

struct SimulationWriter {
    snapshot_dir: PathBuf,
    times: Vec<f64>,
    k: u32,
    coefficient_digest: u64,
    checkpoint_every: u64,
    checkpoint_path: PathBuf,
    domain_length: f64,
    run_digest: u64,
    failure: Option<Error>,
}

impl Observer for SimulationWriter {
    fn on_snapshot(&mut self, t: f64, u: &Field) {
        if self.failure.is_some() {
            return;
        }
        let index = self
            .times
            .iter()
            .position(|s| s.to_bits() == t.to_bits())
            .unwrap_or(self.times.len());
        let path = self.snapshot_dir.join(files::snapshot_name(index));
        if let Err(e) = SnapshotFile::from_field(u, t, self.k, self.coefficient_digest).write(&path) {
            self.failure = Some(e);
        }
    }

    fn on_step(&mut self, state: &RunState) -> ControlFlow<()> {
        if self.failure.is_some() {
            return ControlFlow::Break(());
        }
        if self.checkpoint_every > 0 && state.steps_taken.is_multiple_of(self.checkpoint_every) {
            let ck = Checkpoint {
                domain_length: self.domain_length,
                run_digest: self.run_digest,
                state: state.clone(),
            };
            if let Err(e) = ck.write(&self.checkpoint_path) {
                self.failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    status: RunStatus,
    resumed_from_step: Option<u64>,
    steps: u64,
    dt: f64,
    final_time: Option<f64>,
    peak_h1: f64,
    peak_amplitude: f64,
    mass_drift: f64,
    energy_drift: f64,
    snapshots_written: usize,
}

pub fn simulate(cfg: &RunConfig, args: &CommonArgs) -> Result<ExitKind> {
    let grid = cfg.make_grid()?;
    let solver = cfg.solver_config();
    let spec = &cfg.coefficient;
    let digest = run_digest(cfg);

    let snapshot_dir = args.out.join(&cfg.outputs.snapshot_dir);
    fs::create_dir_all(&snapshot_dir).map_err(|e| Error::io(&snapshot_dir, e))?;
    let mut times = vec![0.0];
    times.extend(solver.output_times());

    let phi;
    let (start, resumed_from_step) = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::read(path)?;
            if ck.run_digest != digest
                || ck.state.u.len() != grid.n()
                || ck.domain_length.to_bits() != grid.domain_length().to_bits()
            {
                return Err(Error::Config(format!(
                    "checkpoint {} was written for different grid, solver or coefficient settings",
                    path.display()
                )));
            }
            info!("resuming at t = {} after {} steps", ck.state.t, ck.state.steps_taken);
            let steps = ck.state.steps_taken;
            (Start::Resume { grid: grid.clone(), state: ck.state }, Some(steps))
        }
        None => {
            phi = cfg.initial_field(&grid, args.seed)?;
            (Start::Initial(&phi), None)
        }
    };

    let mut writer = SimulationWriter {
        snapshot_dir,
        times,
        k: solver.k,
        coefficient_digest: files::coefficient_digest(spec),
        checkpoint_every: cfg.outputs.checkpoint_every,
        checkpoint_path: args.out.join(CHECKPOINT_FILE),
        domain_length: grid.domain_length(),
        run_digest: digest,
        failure: None,
    };
    let traj = evolve_observed(start, spec, &solver, &mut writer);
    if let Some(e) = writer.failure {
        return Err(e);
    }
    files::write_scalars_csv(&args.out.join(&cfg.outputs.csv_path), &traj.scalars)?;
    let summary = SimulationSummary {
        status: traj.status,
        resumed_from_step,
        steps: traj.steps,
        dt: traj.dt,
        final_time: traj.last().map(|s| s.t),
        peak_h1: traj.peak_h1,
        peak_amplitude: traj.peak_amplitude,
        mass_drift: traj.mass_drift(),
        energy_drift: traj.energy_drift(),
        snapshots_written: traj.snapshots.len(),
    };
    write_json(&args.out.join(SUMMARY_FILE), &summary)?;
    info!("simulate: {} after {} steps", traj.status.label(), traj.steps);
    Ok(ExitKind::from_status(&traj.status))
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    fitted_rate: Option<f64>,
    rates_by_t0: &'a [(f64, experiments::RateFit)],
    config_digest: &'a str,
    dt: f64,
    horizon: f64,
    snapshot_count: usize,
}

pub fn sweep(cfg: &RunConfig, args: &CommonArgs) -> Result<ExitKind> {
    let Experiment::Sweep(plan) = &cfg.experiment else {
        return Err(Error::Config("sweep needs an [experiment] section with kind = \"sweep\"".into()));
    };
    let grid = cfg.make_grid()?;
    let phi = cfg.initial_field(&grid, args.seed)?;
    let result = experiments::averaging_sweep(
        &phi,
        &cfg.coefficient,
        &plan.omegas,
        &plan.t0s,
        plan.horizon,
        &cfg.solver_config(),
        args.threads,
    )?;
    let csv_path = args.out.join(SWEEP_CSV);
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    result.write_csv(file)?;
    write_json(
        &args.out.join(SWEEP_SUMMARY),
        &SweepSummary {
            fitted_rate: result.fitted_rate,
            rates_by_t0: &result.rates_by_t0,
            config_digest: &result.config_digest,
            dt: result.dt,
            horizon: result.horizon,
            snapshot_count: result.snapshot_count,
        },
    )?;
    let worst = result
        .rows
        .iter()
        .map(|r| ExitKind::from_status(&r.status))
        .max_by_key(|k| match k {
            ExitKind::NanDetected => 3,
            ExitKind::GrowthDetected => 2,
            ExitKind::Completed => 0,
            _ => 1,
        })
        .unwrap_or(ExitKind::Completed);
    Ok(worst)
}

pub fn dichotomy(cfg: &RunConfig, args: &CommonArgs) -> Result<ExitKind> {
    let Experiment::Dichotomy(params) = &cfg.experiment else {
        return Err(Error::Config(
            "dichotomy needs an [experiment] section with kind = \"dichotomy\"".into(),
        ));
    };
    let grid = cfg.make_grid()?;
    let phi = cfg.initial_field(&grid, args.seed)?;
    let report = experiments::dichotomy_experiment(&phi, params, &cfg.solver_config())?;
    write_json(&args.out.join(DICHOTOMY_REPORT), &report)?;
    for note in &report.notes {
        info!("dichotomy: {note}");
    }
    Ok(ExitKind::Completed)
}

/// Per-snapshot scalars plus space-time norms over the whole directory.
pub fn diagnose(cfg: &RunConfig, dir: &Path, out: &Path) -> Result<ExitKind> {
    let paths = files::list_snapshots(dir)?;
    if paths.is_empty() {
        return Err(Error::InsufficientData(format!("no snapshot files in {}", dir.display())));
    }
    let lambda = forcing::mean(&cfg.coefficient);
    let mut snapshots = Vec::with_capacity(paths.len());
    let csv_path = out.join(DIAGNOSTICS_CSV);
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["file", "t", "mass", "energy", "l2_norm", "h1_norm", "max_abs"])?;
    for p in &paths {
        let snap = SnapshotFile::read(p)?;
        let field = snap.to_field()?;
        let name = p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let row = [
            snap.time,
            diagnostics::mass(&field),
            diagnostics::energy(&field, lambda, snap.k),
            diagnostics::sobolev_norm(&field, 0.0),
            diagnostics::sobolev_norm(&field, 1.0),
            field.max_abs(),
        ];
        let mut record = vec![name];
        record.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&record)?;
        println!("{}", record.join("\t"));
        snapshots.push(Snapshot { t: snap.time, field });
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    snapshots.sort_by(|a, b| a.t.total_cmp(&b.t));
    let norms_path = out.join(NORMS_CSV);
    let mut w = csv::Writer::from_path(&norms_path)?;
    w.write_record(["norm", "component", "value"])?;
    if snapshots.len() >= 2 {
        for (norm, parts) in [
            ("X_T", diagnostics::xt_components_snapshots(&snapshots)?),
            ("Y_T", diagnostics::yt_components_snapshots(&snapshots)?),
        ] {
            let total: f64 = parts.iter().map(|c| c.value).sum();
            for c in parts {
                w.write_record([norm, c.label, &format!("{:e}", c.value)])?;
            }
            w.write_record([norm, "total", &format!("{total:e}")])?;
            println!("{norm}\t{total:e}");
        }
    } else {
        info!("diagnose: a single snapshot has no time extent; space-time norms skipped");
    }
    w.flush().map_err(|e| Error::io(&norms_path, e))?;
    Ok(ExitKind::Completed)
}
