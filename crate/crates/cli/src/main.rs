// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::Format;

/// Dynamical decoupling of a geometric spin-1 qubit: simulation, sweeps and fits.
///
/// Any config key can be overridden as `--section.key value`, e.g.
/// `--drive.detuning_khz 0`. Short forms: --detuning-khz, --rabi-mhz,
/// --pulse-length-error, --t1-ms, --samples.
#[derive(Parser, Debug)]
#[command(name = "geodd", version)]
struct Cli {
    /// TOML or JSON run configuration; shipped defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (directory for `reproduce`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed of the bath ensemble.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "GEODD_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ensemble-averaged τ scan; writes one row per (τ, N).
    Simulate,
    /// Noiseless leakage map over splitting × τ × N.
    Sweep,
    /// Fits a model to columns of a CSV file and prints a JSON report.
    Fit(FitArgs),
    /// Same as `fit --model dips`.
    Dips(DipArgs),
    /// Writes the data behind one of the standard figures.
    Reproduce {
        #[arg(value_enum)]
        figure: figures::Figure,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    GateError,
    Envelope,
    PowerLaw,
    Dips,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[command(flatten)]
    pub common: DipArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DipArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Abscissa column; model default when omitted.
    #[arg(long)]
    pub x: Option<String>,
    /// Ordinate column; model default when omitted.
    #[arg(long)]
    pub y: Option<String>,
    /// Keep only rows with this `n_gates` value.
    #[arg(long)]
    pub select_n: Option<usize>,
    #[arg(long, default_value_t = geodd::analysis::DEFAULT_PROMINENCE)]
    pub prominence: f64,
    /// Rolling-median window in points.
    #[arg(long)]
    pub window: Option<usize>,
    /// Residual-bootstrap resamples for the standard errors.
    #[arg(long)]
    pub bootstrap: Option<usize>,
}

fn run() -> Result<()> {
    let argv: Vec<String> = std::env::args().collect();
    let (argv, overrides) = config::extract_overrides(argv)?;
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) {
            e.exit()
        }
        let text = e.render().to_string();
        let msg: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with("Usage:") && !l.starts_with("For more information"))
            .collect();
        anyhow::anyhow!(msg.join(" ").trim_start_matches("error: ").to_string())
    })?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    let mut cfg = config::load(cli.config.as_deref(), &overrides)?;
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    cfg.validate()?;

    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Sweep => commands::sweep(&cfg),
        Command::Fit(args) => commands::fit(args.model, &args.common, cli.out.as_deref()),
        Command::Dips(args) => commands::fit(Model::Dips, &args, cli.out.as_deref()),
        Command::Reproduce { figure } => figures::reproduce(figure, &cfg, cli.out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
