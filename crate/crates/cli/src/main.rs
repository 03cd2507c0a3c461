//! `bphi` command-line driver: runs one experiment from a TOML config with
//! flag overrides and writes CSV or JSON.

mod config;
mod error;
mod experiments;
mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{Config, Experiment, Format, MgfSource, Points, Space};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bphi", version, about = "B(φ) norm and tail-bound experiments")]
struct Args {
    /// Experiment to run; falls back to `experiment` in the config.
    #[arg(value_enum)]
    experiment: Option<Experiment>,
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// RNG seed (default: config, then $BPHI_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Young function, e.g. "quadratic{d=2}".
    #[arg(long)]
    phi: Option<String>,
    /// Distribution, e.g. "weibull{p=1.5,d=1}".
    #[arg(long)]
    dist: Option<String>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo repetitions for tail estimates.
    #[arg(long)]
    reps: Option<usize>,
    /// Relative norm tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    space: Option<Space>,
    #[arg(long, value_enum)]
    mgf: Option<MgfSource>,
    /// Fixed component norm, skipping estimation.
    #[arg(long)]
    norm: Option<f64>,
    /// Threshold radii "start:stop:step" along the all-ones direction.
    #[arg(long)]
    x: Option<String>,
    /// Comma-separated summand counts.
    #[arg(long, value_delimiter = ',')]
    n_set: Option<Vec<u64>>,
    /// Test function for `characterize`, e.g. "cosh{d=2}".
    #[arg(long)]
    function: Option<String>,
    /// Sign pattern "+-" or "abs".
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    kmax: Option<usize>,
    /// Stencil box "lo:hi".
    #[arg(long = "box")]
    box_range: Option<String>,
}

impl Args {
    fn overrides(&self) -> Config {
        Config {
            experiment: self.experiment,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            phi: self.phi.clone(),
            dist: self.dist.clone(),
            n: self.n,
            reps: self.reps,
            tol: self.tol,
            space: self.space,
            mgf: self.mgf,
            norm: self.norm,
            x: self.x.clone().map(Points::Grid),
            n_set: self.n_set.clone(),
            function: self.function.clone(),
            eps: self.eps.clone(),
            kmax: self.kmax,
            box_range: self.box_range.clone(),
            suite: None,
        }
    }
}

/// Ok(true) when no verdict reports a bound violation.
fn execute(args: &Args) -> Result<bool, CliError> {
    let base = match &args.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let cfg = base.merge(args.overrides());
    let kind = *Config::require(&cfg.experiment, "experiment")?;
    let format = cfg.format.unwrap_or(match kind {
        Experiment::Norm | Experiment::Equivalence => Format::Json,
        _ => Format::Csv,
    });
    let start = Instant::now();
    let out = experiments::run(kind, &cfg)?;
    output::emit(&out, format, cfg.out.as_deref())?;
    eprintln!(
        "{}: {} records, {} violations, {:.2}s",
        kind.name(),
        out.records.len(),
        out.violations,
        start.elapsed().as_secs_f64()
    );
    Ok(out.violations == 0)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
