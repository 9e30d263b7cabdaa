//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid configuration
//! or parameters, 3 unresolved length scales (or a sweep where every point
//! failed), 4 solver failure, 5 sweep with some failed points.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Invalid configuration or flags; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Computation finished but not every requested item succeeded.
#[derive(Debug)]
pub struct PartialFailure {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for PartialFailure {}

#[derive(Parser, Debug)]
#[command(name = "delamina", version, about = "Energy scaling of compressed thin films: constructions, sweeps, stability")]
pub struct Cli {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Cells per side (cells along x for strip domains).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a functional on a construction, the zero state or a saved state.
    Energy(EnergyArgs),
    /// Build a named construction and dump it.
    Construct(ConstructArgs),
    /// Minimize a functional starting from a construction.
    Minimize(MinimizeArgs),
    /// Evaluate constructions over a list of (sigma, gamma) points.
    Sweep(SweepArgs),
    /// Regime lattice and boundary curves.
    PhaseDiagram(PhaseArgs),
    /// Critical strain of a compressed disc.
    Stability(StabilityArgs),
    /// Compare the lifted 3D energy with the plate energy.
    Lift3d(LiftArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct ParamFlags {
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub young: Option<f64>,
    #[arg(long)]
    pub thickness: Option<f64>,
    #[arg(long)]
    pub eigenstrain: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ZeroState {
    Zero,
}

#[derive(Args, Debug)]
pub struct EnergyArgs {
    /// eikonal, fvk, fvk-general, bonded, bonded-smooth or linearized.
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long, conflicts_with_all = ["w", "state"])]
    pub construction: Option<String>,
    /// Use `u = 0`, `w = 0` on the unit square.
    #[arg(long, conflicts_with = "state")]
    pub w: Option<ZeroState>,
    /// State JSON written by `construct` or `minimize`.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(long)]
    pub construction: Option<String>,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Args, Debug)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub construction: Option<String>,
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Amplitude of a seeded perturbation of the initial state.
    #[arg(long)]
    pub noise: Option<f64>,
    #[command(flatten)]
    pub params: ParamFlags,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// A point `SIGMA,GAMMA`; repeat for more. Replaces the config point list.
    #[arg(long = "point", value_name = "SIGMA,GAMMA")]
    pub points: Vec<String>,
    /// construct-only or construct-minimize.
    #[arg(long)]
    pub mode: Option<String>,
    /// Force one construction instead of choosing by regime.
    #[arg(long)]
    pub construction: Option<String>,
    #[arg(long)]
    pub minimize_iterations: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    pub gamma_min: Option<f64>,
    #[arg(long)]
    pub gamma_max: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    /// Fill unset parameters with the reference experiment (h = 20 nm, R = 10 um, nu = 0.277).
    #[arg(long)]
    pub experiment: bool,
    #[arg(long)]
    pub young: Option<f64>,
    #[arg(long)]
    pub thickness: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub n_points: Option<usize>,
    #[arg(long)]
    pub delta_exp: Option<f64>,
}

#[derive(Args, Debug)]
pub struct LiftArgs {
    /// Eigenstrain; repeat for a sequence.
    #[arg(long = "delta")]
    pub deltas: Vec<f64>,
    #[arg(long)]
    pub thickness_ratio: Option<f64>,
    #[arg(long)]
    pub nz: Option<usize>,
    #[arg(long)]
    pub mollify: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(p) = err.downcast_ref::<PartialFailure>() {
        return p.code;
    }
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<delamina::Error>() {
        Some(delamina::Error::Input { .. } | delamina::Error::Regime(_) | delamina::Error::Unsupported(_)) => 2,
        Some(delamina::Error::Resolution(_)) => 3,
        Some(delamina::Error::Solver(_)) => 4,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), ConfigError> {
    let Ok(v) = std::env::var("DELAMINA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError(format!("DELAMINA_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().map_err(anyhow::Error::from).and_then(|_| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
