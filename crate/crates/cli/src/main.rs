//! `rydcav`: trap, exposure, field, sweep and fit commands driven by a single
//! TOML project file.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure, 3 sweep finished with failed points.

mod cmd;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rydcav::config::ProjectConfig;

#[derive(Debug, Parser)]
#[command(name = "rydcav", version, about = "Superconducting cavity and Rydberg-atom coupling toolkit")]
struct Cli {
    /// Project file (TOML). Without it the reference design is used.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for sweeps.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,

    /// Seed for synthetic data.
    #[arg(long, global = true, value_name = "S", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trap depth, oscillation frequencies, cloud size and potential profiles.
    Trap,
    /// Laser power on the chip, scattering and the flip-chip width table.
    Exposure,
    /// Solve the configured cross-section and export the field map.
    Field,
    /// Geometry sweep at fixed resonance frequency.
    Sweep(SweepArgs),
    /// Fit a reflection trace (CSV: freq_Hz,re_S11,im_S11).
    Fit(FitArgs),
    /// Generate a synthetic reflection trace from the [synth] section.
    Synth(SynthArgs),
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SweepKindArgs {
    /// Plate width and gap of the planar capacitor.
    #[arg(long)]
    planar: bool,
    /// Plate distance of the flip-chip capacitor.
    #[arg(long)]
    flipchip: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    kind: SweepKindArgs,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Trace to fit.
    trace: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output file; defaults to synth_trace.csv in the output directory.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Partial(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Partial(_) => 3,
        }
    }
}

impl From<rydcav::Error> for Failure {
    fn from(e: rydcav::Error) -> Self {
        use rydcav::Error as E;
        match e {
            E::Format(_) | E::Io(_) | E::InvalidTrace(_) => Failure::Usage(e.to_string()),
            E::NotConverged { ref history, .. } => {
                let tail: Vec<String> = history.iter().rev().take(8).rev().map(|r| format!("{r:.3e}")).collect();
                Failure::Numerical(format!("{e}; last residuals [{}]", tail.join(", ")))
            }
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("io error: {e}"))
    }
}

/// Settings shared by every command.
pub struct Context {
    pub config: ProjectConfig,
    pub json: bool,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub seed: u64,
}

impl Context {
    /// Output path inside the output directory, creating the directory.
    pub fn output(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", self.out.display())))?;
        Ok(self.out.join(name))
    }
}

fn load(cli: &Cli) -> Result<Context, Failure> {
    let config = match &cli.config {
        Some(p) => ProjectConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => ProjectConfig::default(),
    };
    let out = cli.out.clone().or_else(|| config.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| "output".into());
    Ok(Context { config, json: cli.json, out, jobs: cli.jobs.map(usize::from), seed: cli.seed })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = load(&cli)?;
    match cli.command {
        Command::Trap => cmd::trap::run(&ctx),
        Command::Exposure => cmd::exposure::run(&ctx),
        Command::Field => cmd::field::run(&ctx),
        Command::Sweep(a) => cmd::sweep::run(&ctx, a.kind.flipchip),
        Command::Fit(a) => cmd::fit::run(&ctx, &a.trace),
        Command::Synth(a) => cmd::fit::synth(&ctx, a.output.as_deref()),
        Command::Config => {
            print!("{}", ctx.config.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Numerical(m) | Failure::Partial(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
