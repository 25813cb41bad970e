//! `grainfield`: regime classification, simulation, limit sampling and
//! verification for the anisotropic random grain model.
//!
//! Exit codes: 0 success, 1 failed verification or I/O error, 2 invalid
//! input or configuration, 3 sampling budget exceeded, 4 quadrature failure,
//! 5 regime mismatch.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grainfield::verify::Suite;

use crate::config::{RunConfig, DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "grainfield", version, about = "Anisotropic random grain model toolkit")]
struct Cli {
    /// Worker threads (0 = available parallelism); overrides the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides execution.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides execution.replicates.
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the limit family, H, log flag and constants.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        p: f64,
        #[arg(long, allow_hyphen_values = true)]
        gamma: f64,
        /// Rate cap exponent of the workload model; `inf` for no cap.
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Classify the workload limit (implied by --beta).
        #[arg(long)]
        workload: bool,
        #[arg(long, default_value_t = 1.0)]
        r_min: f64,
    },
    /// Exact realizations of S over the configured lambdas and grid.
    SimulateField(ConfigArgs),
    /// Sweep gamma and lambda; fits the variance scaling slope per gamma.
    ScanGamma(ConfigArgs),
    /// Empirical against exact covariance of the point field.
    Covariance(ConfigArgs),
    /// Paths of the limit object of the configured regime.
    LimitSample(ConfigArgs),
    /// Normalized workload paths.
    Workload(ConfigArgs),
    /// Run the acceptance checks.
    Verify {
        #[arg(long, default_value = "fast-smoke")]
        suite: Suite,
        #[arg(long, default_value_t = 20261016)]
        seed: u64,
        /// Comma-separated criterion ids; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn load(args: &ConfigArgs, threads: Option<usize>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.execution.seed = s;
    }
    if let Some(n) = args.replicates {
        if n == 0 {
            return Err(CliError::Config("--replicates must be positive".into()));
        }
        cfg.execution.replicates = n;
    }
    if let Some(t) = threads {
        cfg.execution.threads = t;
    }
    cfg.resolve_output();
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) {
    // The global pool can only be built once; later calls are no-ops.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_n: usize) {}

fn run(cli: Cli) -> Result<(), CliError> {
    let with_config = |args: &ConfigArgs, f: fn(&RunConfig) -> Result<(), CliError>| {
        let cfg = load(args, cli.threads)?;
        set_threads(cfg.execution.threads);
        f(&cfg)
    };
    match &cli.command {
        Command::Classify {
            alpha,
            p,
            gamma,
            beta,
            workload,
            r_min,
        } => commands::classify(&commands::ClassifyArgs {
            alpha: *alpha,
            p: *p,
            gamma: *gamma,
            beta: *beta,
            workload: *workload,
            r_min: *r_min,
        }),
        Command::SimulateField(a) => with_config(a, commands::simulate_field),
        Command::ScanGamma(a) => with_config(a, commands::scan_gamma),
        Command::Covariance(a) => with_config(a, commands::covariance),
        Command::LimitSample(a) => with_config(a, commands::limit_sample),
        Command::Workload(a) => with_config(a, commands::workload),
        Command::Verify { suite, seed, only } => {
            set_threads(cli.threads.unwrap_or(0));
            let dir = std::env::var(OUTPUT_DIR_ENV).unwrap_or_else(|_| DEFAULT_OUTPUT_DIR.to_string());
            commands::verify(*suite, *seed, only, &dir)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
