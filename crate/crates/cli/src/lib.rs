//! Command-line front end: TOML run specs, solver orchestration and report files.

pub mod commands;
pub mod error;
pub mod output;
pub mod selftest;
pub mod spec;
pub mod sweep;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;
pub use spec::{Method, RunSpec, SpecError};

/// Periodic steady states of forced, boundary-damped oscillator chains.
///
/// Runs are described by a TOML file with sections [chain], [potential.V],
/// [potential.U], [forcing], [solver], [integrator], [output], [diagnostics]
/// and [sweep]. Unknown keys are rejected. Defaults: omega0 = 1, gamma = 0,
/// nu = 0, potentials zero, solver tol = 1e-12 with adaptive harmonics,
/// integrator 1024 steps per period for 100 periods from rest, output dir "out".
///
/// Exit codes: 0 ok, 1 I/O, 2 config, 3 resonance or radius gate,
/// 4 non-convergence, 5 oracle or internal failure.
#[derive(Debug, Parser)]
#[command(name = "forced-chain", version)]
pub struct Cli {
    /// Run spec (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides [solver].method.
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// Overrides [solver].tol.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Overrides [output].dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Overrides the spec seed (randomized suites).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print resonance gaps and convergence radii.
    Gap,
    /// Solve for the periodic orbit; writes solution.csv and report.json.
    Solve,
    /// Integrate in time; writes trajectory.csv, distances.csv and trajectory.json.
    Integrate {
        /// Harmonics table to measure strobe distances against (default: <out>/solution.csv,
        /// solving afresh when absent).
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Work, dissipation, energy balance and localization; writes diagnostics.json/.txt.
    Diagnose,
    /// Run the [sweep] grid, one point_XXXX directory per grid point.
    Sweep,
    /// Write the per-harmonic Green's kernels to greens.csv.
    GreensDump {
        /// Highest harmonic (default: [solver].harmonics or max(4 M_F, 16)).
        #[arg(long)]
        harmonics: Option<usize>,
    },
    /// Run the embedded oracle suites.
    Selftest,
}

pub fn load_spec(cli: &Cli) -> Result<RunSpec, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut spec = RunSpec::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(m) = cli.method {
        spec.solver.method = m;
    }
    if let Some(t) = cli.tol {
        spec.solver.tol = t;
    }
    if let Some(o) = &cli.out {
        spec.output.dir = o.display().to_string();
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

/// Runs one invocation and returns the text for stdout.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if let Command::Selftest = cli.command {
        let seed = match &cli.config {
            Some(_) => load_spec(cli)?.seed,
            None => cli.seed.unwrap_or(0),
        };
        let checks = selftest::run_all(seed);
        let text = selftest::render(&checks);
        if checks.iter().all(|c| c.passed) {
            return Ok(text);
        }
        return Err(CliError::Oracle(format!("\n{text}")));
    }
    let spec = load_spec(cli)?;
    match &cli.command {
        Command::Gap => commands::gap(&spec),
        Command::Solve => commands::solve(&spec),
        Command::Integrate { solution } => commands::integrate(&spec, solution.as_deref()),
        Command::Diagnose => commands::diagnose(&spec),
        Command::Sweep => sweep::sweep(&spec, cli.workers),
        Command::GreensDump { harmonics } => commands::greens_dump(&spec, *harmonics),
        Command::Selftest => unreachable!(),
    }
}
