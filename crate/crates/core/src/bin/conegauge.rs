//! Command-line harness: regulator evaluation, invariant check suites,
//! Hamiltonian evolution runs, and single-slice observables.
//!
//! Exit codes: 0 all checks pass, 1 a physics/numerics check failed,
//! 2 configuration or infrastructure error.

use clap::{Args, Parser, Subcommand};

use conegauge::error::{Error, Result};
use conegauge::harness::{self, RunConfig};
use conegauge::regulator;

#[derive(Parser)]
#[command(name = "conegauge", version = conegauge::VERSION, about = "Spectral simulator and identity-verification harness for an inner-space gauge theory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Path to a key-value configuration file
    #[arg(long)]
    config: Option<String>,
    /// Override a config key, e.g. --set grid.n=16 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the regularized cone integral Omega_n
    Omega {
        /// Moment index n
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Monte Carlo cross-check sample count (0 disables)
        #[arg(long, default_value_t = 0)]
        samples: u64,
        /// Monte Carlo seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a named invariant check suite
    Check {
        /// Suite id (one of the named suites, or "all")
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evolve an initial state and emit per-snapshot observables
    Evolve {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Report observables of the configured initial state without evolving
    Observables {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Print the artifact version
    Version,
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &args.sets {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(key.trim(), value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Returns whether every executed check passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Omega { n, samples, seed } => {
            let value = regulator::omega(n)?;
            println!("omega_{n} = {value:.12e}");
            if samples > 0 {
                let (est, sigma) = regulator::omega_oracle(n, samples, seed)?;
                println!("omega_{n}_mc = {est:.12e} +- {sigma:.3e} ({samples} samples, seed {seed})");
                println!("omega_{n}_mc_z = {:.3}", (est - value).abs() / sigma);
            }
            Ok(true)
        }
        Command::Check { suite, cfg } => {
            let mut cfg = load_config(&cfg)?;
            cfg.suite = suite;
            cfg.validate()?;
            let report = harness::run_check_suite(&cfg)?;
            for check in &report.checks {
                println!("{}", check.line());
            }
            println!(
                "suite {}: {} of {} checks passed",
                report.suite,
                report.checks.iter().filter(|c| c.pass).count(),
                report.checks.len()
            );
            Ok(report.all_pass())
        }
        Command::Evolve { cfg } => {
            let cfg = load_config(&cfg)?;
            let report = harness::run_evolution(&cfg)?;
            if cfg.output_csv.is_none() {
                print!("{}", report.csv());
            }
            if let Some(sum) = &report.summary {
                eprintln!(
                    "evolved {} steps: H drift {:.3e}, max Gauss residual {:.3e}",
                    report.rows.last().map_or(0, |r| r.step),
                    sum.h_drift_rel,
                    sum.max_gauss_residual
                );
            }
            Ok(true)
        }
        Command::Observables { cfg } => {
            let cfg = load_config(&cfg)?;
            let state = cfg.initial_state()?;
            let row = harness::observable_row(0, &state)?;
            println!("{}", harness::CSV_HEADER);
            println!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                row.step,
                row.t,
                row.h,
                row.p[0],
                row.p[1],
                row.p[2],
                row.p[3],
                row.l,
                row.gauss_residual,
                row.divfree_residual,
                row.reality_residual,
                row.support_leak
            );
            Ok(true)
        }
        Command::Version => {
            println!("conegauge {}", conegauge::VERSION);
            Ok(true)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
