use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spherefield::experiments::EXPERIMENT_NAMES;
use spherefield::runner::{self, RunConfig, ValidationReport};

#[derive(Parser)]
#[command(
    name = "spherefield",
    version,
    about = "Verification experiments for Gaussian fields on the sphere with power-law spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a JSON config and write results, CSV tables,
    /// and a manifest.
    Run {
        /// Path to the run config (JSON).
        config: PathBuf,
        /// Output directory; defaults to $SPHEREFIELD_OUT, then ./spherefield-runs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's worker thread count.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a config and echo derived quantities without running.
    Validate {
        /// Path to the run config (JSON).
        config: PathBuf,
    },
    /// List the available experiments, one per line.
    List,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            for (name, description) in EXPERIMENT_NAMES {
                println!("{name}\t{description}");
            }
            ExitCode::from(0)
        }
        Command::Validate { config } => {
            match RunConfig::load(&config).and_then(|cfg| runner::validate(&cfg)) {
                Ok(report) => {
                    print_report(&report);
                    ExitCode::from(0)
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = match RunConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(err) => {
                    eprintln!("error: {err}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(threads) = threads {
                cfg.threads = Some(threads);
            }
            let out_dir = out.unwrap_or_else(|| {
                std::env::var_os(runner::OUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from(runner::OUT_DIR_FALLBACK))
            });
            match runner::run_with_progress(&cfg, &out_dir, |result, seconds| {
                let verdict = if result.passed { "pass" } else { "FAIL" };
                println!("{verdict}  {:<22} {seconds:7.1}s", result.experiment);
            }) {
                Ok(outcome) => {
                    println!(
                        "{} of {} experiments passed; manifest at {}",
                        outcome
                            .manifest
                            .experiments
                            .iter()
                            .filter(|e| e.passed)
                            .count(),
                        outcome.manifest.experiments.len(),
                        outcome.manifest_path.display()
                    );
                    ExitCode::from(if outcome.all_passed { 0 } else { 1 })
                }
                Err(err) => {
                    eprintln!("error: {err}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn print_report(report: &ValidationReport) {
    println!(
        "alpha = {}, d = {}, gamma = {}, delta = {}, seed = {}, threads = {}",
        report.alpha, report.d, report.gamma, report.delta, report.seed, report.threads
    );
    println!(
        "beta = {}, eta = {}, gamma0 = {}",
        report.beta, report.eta, report.gamma0
    );
    println!("experiments: {}", report.experiments.join(", "));
    if !report.radii.is_empty() {
        println!("radius        rho_alpha     band L..U");
        for echo in &report.radii {
            let band = match echo.band {
                Some((lo, hi)) => format!("{lo}..{hi}"),
                None => "-".to_string(),
            };
            println!("{:<13.6e} {:<13.6e} {band}", echo.radius, echo.rho);
        }
    }
}
