//! Run named verification experiments with default settings and print every
//! check row, fitted exponent, and recorded constant. Useful for poking a
//! single experiment at a non-default `(alpha, d)` without writing a full
//! run config.
//!
//!     cargo run --release --example experiment_report -- small-ball chung-lil
//!     cargo run --release --example experiment_report -- --alpha 2.5 --d 2 local-time-moments
//!     cargo run --release --example experiment_report -- --all

use std::time::Instant;

use clap::Parser;
use spherefield::experiments::{
    run_experiment, ExperimentSpec, RunContext, EXPERIMENT_NAMES,
};
use spherefield::spectral::table::TableConfig;
use spherefield::spectral::{AngularPowerSpectrum, ModelParams};

#[derive(Parser)]
struct Args {
    /// Experiment names (see `EXPERIMENT_NAMES`); empty plus --all runs all.
    names: Vec<String>,
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 0.08)]
    delta: f64,
    /// Run every registered experiment.
    #[arg(long)]
    all: bool,
}

fn main() -> spherefield::Result<()> {
    let args = Args::parse();
    let names: Vec<String> = if args.all {
        EXPERIMENT_NAMES.iter().map(|(n, _)| n.to_string()).collect()
    } else {
        args.names.clone()
    };
    if names.is_empty() {
        println!("no experiments named; try --all or e.g. `small-ball`");
        return Ok(());
    }

    let spectrum = AngularPowerSpectrum::power_law(args.alpha)?;
    let params = ModelParams::new(spectrum, args.d, args.gamma)?;
    let table = TableConfig {
        knots: 1 << 14,
        degree: 200_000,
    };
    let ctx = RunContext::new(params, args.seed, args.delta, 1, table)?;

    for name in &names {
        let spec = ExperimentSpec::from_name(name)?;
        let clock = Instant::now();
        let result = run_experiment(&spec, &ctx)?;
        println!(
            "== {name} [{}] {:.1}s",
            if result.passed { "PASS" } else { "FAIL" },
            clock.elapsed().as_secs_f64()
        );
        for c in &result.checks {
            println!(
                "  {} {} | {} | observed {:.6} target {} | {}",
                if c.passed { "ok  " } else { "FAIL" },
                if c.gating { "gate" } else { "info" },
                c.name,
                c.observed,
                c.target,
                c.note
            );
        }
        for f in &result.fits {
            println!(
                "  fit  {} slope {:.4} se {:.4} r2 {:.4}",
                f.name, f.slope, f.stderr, f.r_squared
            );
        }
        for (k, v) in &result.constants {
            println!("  const {k} = {v:.6}");
        }
    }
    Ok(())
}
