//! Command-line surface: fringe tables, sensitivity reports, synthetic
//! counts, and the full fit chain with a bootstrap Fisher band.
//!
//! Exit codes: 0 success, 2 usage or domain-validation error, 3 input
//! I/O or parse error, 4 numerical non-convergence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distinguishability::{add_phase_insensitive_noise, MismatchModel, NoiseParameter};
use crate::error::{Error, Result};
use crate::estimation::{
    fit_fringe, monte_carlo_fisher, simulate_records, FitConfig, FitMode,
};
use crate::fock::TwoModeState;
use crate::interferometer::{outcome_distribution, FringeTable, PhaseGrid};
use crate::io;
use crate::metrology::{fisher_curve, sensitivity_report, FisherCurve, DEFAULT_FD_STEP};
use crate::states::{holland_burnett_state, uncorrelated_state, yurke_state};

#[derive(Debug, Parser)]
#[command(
    name = "squint",
    version,
    about = "Few-photon spin-squeezed interferometry: simulate fringes, score sensitivity, model detectors, and fit counts"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the phase-resolved outcome distribution table.
    Fringe(FringeArgs),
    /// Write squeezing parameters and the Fisher-information curve.
    Report(ReportArgs),
    /// Generate synthetic coincidence counts from the detector model.
    SimulateCounts(SimulateArgs),
    /// Fit measured counts and bootstrap the Fisher-information band.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StateKind {
    Yurke,
    Uncorrelated,
    HollandBurnett,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

/// Phase-grid flags shared by the generating subcommands. The grid is
/// specified in instrument coordinates x and mapped to radians as
/// φ = scale·x + offset, so half-wave-plate angles can be fed directly.
#[derive(Debug, Args)]
struct GridArgs {
    /// Grid start (default −π).
    #[arg(long = "phi-start", allow_hyphen_values = true)]
    phi_start: Option<f64>,
    /// Grid stop, inclusive (default π).
    #[arg(long = "phi-stop", allow_hyphen_values = true)]
    phi_stop: Option<f64>,
    /// Grid step (default π/15).
    #[arg(long = "phi-step")]
    phi_step: Option<f64>,
    /// Linear map scale from the grid coordinate to phase radians.
    #[arg(long = "phase-scale", default_value_t = 1.0)]
    phase_scale: f64,
    /// Linear map offset in radians.
    #[arg(long = "phase-offset", default_value_t = 0.0, allow_hyphen_values = true)]
    phase_offset: f64,
}

impl GridArgs {
    fn build(&self) -> Result<PhaseGrid> {
        if !(self.phase_scale > 0.0) {
            return Err(Error::OutOfRange {
                name: "phase-scale",
                value: self.phase_scale,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        let start = self.phi_start.unwrap_or(-std::f64::consts::PI);
        let stop = self.phi_stop.unwrap_or(std::f64::consts::PI);
        let step = self.phi_step.unwrap_or(std::f64::consts::PI / 15.0);
        let raw = PhaseGrid::from_range(start, stop, step)?;
        PhaseGrid::new(
            raw.values()
                .iter()
                .map(|x| self.phase_scale * x + self.phase_offset)
                .collect(),
        )
    }
}

#[derive(Debug, Args)]
struct FringeArgs {
    #[arg(long, value_enum)]
    state: StateKind,
    /// Total photon number (odd for yurke, even for holland-burnett).
    #[arg(long)]
    n: usize,
    /// Mode overlap between the two source arms, in [0, 1].
    #[arg(long = "i", default_value_t = 1.0)]
    indistinguishability: f64,
    /// Phase-insensitive noise weight, in [0, 1].
    #[arg(long = "s", default_value_t = 0.0)]
    noise: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_enum)]
    state: StateKind,
    #[arg(long)]
    n: usize,
    #[arg(long = "i", default_value_t = 1.0)]
    indistinguishability: f64,
    #[arg(long = "s", default_value_t = 0.0)]
    noise: f64,
    /// Central-difference step for the Fisher curve.
    #[arg(long = "fd-step", default_value_t = DEFAULT_FD_STEP)]
    fd_step: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Output prefix; writes <prefix>.report.json and <prefix>.fisher.{csv,json}.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// True phase offset added to every grid label.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi0: f64,
    #[arg(long = "i", default_value_t = 1.0)]
    indistinguishability: f64,
    /// Overall scale M (expected rescaled counts per setting).
    #[arg(long = "m", default_value_t = 1000.0)]
    scale: f64,
    #[arg(long = "s", default_value_t = 0.0)]
    noise: f64,
    /// Efficiency table CSV (a1..a7,b1..b7).
    #[arg(long)]
    efficiency: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// RNG seed; falls back to SQUINT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Write exact expected rates instead of Poisson samples.
    #[arg(long, default_value_t = false)]
    noiseless: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Coincidence CSV (phi,D0..D5).
    #[arg(long)]
    counts: PathBuf,
    /// Efficiency table CSV (a1..a7,b1..b7).
    #[arg(long)]
    efficiency: PathBuf,
    #[arg(long, value_enum, default_value_t = CliFitMode::Global)]
    mode: CliFitMode,
    /// Pin the noise weight instead of fitting it.
    #[arg(long = "pin-s")]
    pin_noise: Option<f64>,
    /// Bootstrap iterations for the Fisher band.
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "fd-step", default_value_t = DEFAULT_FD_STEP)]
    fd_step: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Output prefix; writes <prefix>.fit.json, <prefix>.fisher.*, <prefix>.band.*.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliFitMode {
    Global,
    PerPoint,
}

impl From<CliFitMode> for FitMode {
    fn from(mode: CliFitMode) -> Self {
        match mode {
            CliFitMode::Global => FitMode::Global,
            CliFitMode::PerPoint => FitMode::PerPoint,
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SQUINT_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(0)
}

fn build_state(kind: StateKind, n: usize) -> Result<TwoModeState> {
    match kind {
        StateKind::Yurke => yurke_state(n),
        StateKind::Uncorrelated => uncorrelated_state(n),
        StateKind::HollandBurnett => holland_burnett_state(n),
    }
}

/// Outcome-distribution closure for a state kind with mismatch and noise.
fn distribution_for(
    kind: StateKind,
    n: usize,
    indistinguishability: f64,
    noise: f64,
) -> Result<Box<dyn Fn(f64) -> Result<Vec<f64>> + Sync>> {
    let s = NoiseParameter::new(noise)?;
    if !(0.0..=1.0).contains(&indistinguishability) {
        return Err(Error::OutOfRange {
            name: "indistinguishability",
            value: indistinguishability,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if indistinguishability < 1.0 && kind != StateKind::Yurke {
        return Err(Error::Unsupported(
            "partial distinguishability is modeled for the photon-subtracted (yurke) pipeline only; use --i 1",
        ));
    }
    if kind == StateKind::Yurke && indistinguishability < 1.0 {
        let model = MismatchModel::new(n)?;
        Ok(Box::new(move |phi| {
            model.probabilities_with_noise(indistinguishability, s, phi)
        }))
    } else {
        let state = build_state(kind, n)?;
        Ok(Box::new(move |phi| {
            let p = outcome_distribution(&state, phi)?;
            add_phase_insensitive_noise(&p, s)
        }))
    }
}

fn fisher_suffix(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "fisher.csv",
        OutputFormat::Json => "fisher.json",
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    prefix.with_file_name(name)
}

impl Cli {
    pub fn run(self) -> Result<()> {
        match self.command {
            Command::Fringe(args) => run_fringe(args),
            Command::Report(args) => run_report(args),
            Command::SimulateCounts(args) => run_simulate(args),
            Command::Fit(args) => run_fit(args),
        }
    }
}

fn run_fringe(args: FringeArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let dist = distribution_for(args.state, args.n, args.indistinguishability, args.noise)?;
    let rows = grid
        .values()
        .iter()
        .map(|&phi| dist(phi))
        .collect::<Result<Vec<_>>>()?;
    let table = FringeTable::new(args.n, grid, rows)?;
    match args.format {
        OutputFormat::Csv => io::write_fringe_csv(&args.output, &table),
        OutputFormat::Json => io::write_json(&args.output, &table),
    }
}

fn run_report(args: ReportArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let state = build_state(args.state, args.n)?;
    let dist = distribution_for(args.state, args.n, args.indistinguishability, args.noise)?;
    let (report, curve) = sensitivity_report(&state, dist, &grid, args.fd_step)?;
    let report_body = serde_json::to_string_pretty(&report).map_err(|e| Error::Json {
        path: args.output.clone(),
        message: e.to_string(),
    })?;
    let fisher_body = match args.format {
        OutputFormat::Csv => io::fisher_curve_to_csv(&curve),
        OutputFormat::Json => serde_json::to_string_pretty(&curve).map_err(|e| Error::Json {
            path: args.output.clone(),
            message: e.to_string(),
        })? + "\n",
    };
    io::atomic_write_many(&[
        (with_suffix(&args.output, "report.json"), report_body + "\n"),
        (with_suffix(&args.output, fisher_suffix(args.format)), fisher_body),
    ])
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let grid = args.grid.build()?;
    let table = io::read_efficiency_csv(&args.efficiency)?;
    let records = if args.noiseless {
        simulate_records(
            &grid,
            args.phi0,
            args.indistinguishability,
            args.scale,
            args.noise,
            &table,
            None,
        )?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(resolve_seed(args.seed));
        simulate_records(
            &grid,
            args.phi0,
            args.indistinguishability,
            args.scale,
            args.noise,
            &table,
            Some(&mut rng),
        )?
    };
    io::write_counts_csv(&args.output, &records)
}

fn run_fit(args: FitArgs) -> Result<()> {
    let records = io::read_counts_csv(&args.counts)?;
    let table = io::read_efficiency_csv(&args.efficiency)?;
    let config = FitConfig {
        mode: args.mode.into(),
        pinned_noise: args.pin_noise,
        ..FitConfig::default()
    };
    let fit = fit_fringe(&records, &table, &config)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            evaluations: fit.evaluations,
            best: fit.residual_sum_of_squares,
        });
    }
    let seed = resolve_seed(args.seed);
    let band = monte_carlo_fisher(&records, &table, args.iterations, seed, &config, args.fd_step)?;

    // Fisher curve of the fitted model, reported against the record labels
    // with the fitted offset applied internally.
    let model = MismatchModel::new(5)?;
    let noise = NoiseParameter::new(fit.noise)?;
    let indistinguishability = fit.indistinguishability;
    let phi0 = fit.phi0.unwrap_or(0.0);
    let labels = PhaseGrid::new(records.iter().map(|r| r.phase).collect()).map_err(|_| {
        Error::DegenerateData("record phases must be strictly increasing for curve output")
    })?;
    let curve: FisherCurve = {
        let dist = |phi: f64| {
            model.probabilities_with_noise(indistinguishability, noise, phi + phi0)
        };
        fisher_curve(dist, &labels, args.fd_step)?
    };

    let fit_body = serde_json::to_string_pretty(&fit).map_err(|e| Error::Json {
        path: args.output.clone(),
        message: e.to_string(),
    })? + "\n";
    let fisher_body = match args.format {
        OutputFormat::Csv => io::fisher_curve_to_csv(&curve),
        OutputFormat::Json => serde_json::to_string_pretty(&curve).map_err(|e| Error::Json {
            path: args.output.clone(),
            message: e.to_string(),
        })? + "\n",
    };
    let (band_suffix, band_body) = match args.format {
        OutputFormat::Csv => ("band.csv", io::band_to_csv(&band)),
        OutputFormat::Json => (
            "band.json",
            serde_json::to_string_pretty(&band).map_err(|e| Error::Json {
                path: args.output.clone(),
                message: e.to_string(),
            })? + "\n",
        ),
    };
    io::atomic_write_many(&[
        (with_suffix(&args.output, "fit.json"), fit_body),
        (with_suffix(&args.output, fisher_suffix(args.format)), fisher_body),
        (with_suffix(&args.output, band_suffix), band_body),
    ])
}

/// Maps an error to the documented exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Json { .. } => 3,
        Error::NonConvergence { .. } => 4,
        _ => 2,
    }
}
