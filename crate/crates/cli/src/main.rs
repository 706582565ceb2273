use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use takerate::data_io::{load_config, SyntheticSpec};
use takerate_cli::{cmd_analyze, cmd_gen_trace, cmd_simulate, write_outputs, Overrides, RunReport};

/// Protocol take-rate optimization for two competing constant-product pools.
#[derive(Parser)]
#[command(name = "takerate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SweepFlags {
    /// Scenario config file (`key = value` per line).
    config: PathBuf,
    /// Take-rate grid spacing.
    #[arg(long)]
    take_step: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form equilibrium sweep over t1.
    Analyze {
        #[command(flatten)]
        sweep: SweepFlags,
    },
    /// Trade-level simulation sweep over t1.
    Simulate {
        #[command(flatten)]
        sweep: SweepFlags,
        /// Liquidity-share grid spacing.
        #[arg(long)]
        liquidity_step: Option<f64>,
        /// Seed for the sticky-trader assignment.
        #[arg(long)]
        seed: Option<u64>,
        /// Also emit the analytical curve next to the simulated one.
        #[arg(long)]
        compare: bool,
    },
    /// Write a synthetic log-normal trade trace.
    GenTrace {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Probability that a trade sells token a.
        #[arg(long, default_value_t = 0.5)]
        bias: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        output: PathBuf,
    },
}

fn load(path: &Path, overrides: Overrides) -> Result<takerate::data_io::ScenarioConfig> {
    let mut config = load_config(path).with_context(|| format!("reading config {}", path.display()))?;
    overrides.apply(&mut config)?;
    Ok(config)
}

fn finish(report: &RunReport, out_dir: &Path) -> Result<()> {
    for path in write_outputs(report, out_dir)? {
        log::info!("wrote {}", path.display());
    }
    let o = &report.optimum;
    println!("t1_star = {}  rev1_star = {}  l1 = {}", o.t1_star, o.rev1_star, o.l1_at_optimum);
    if let Some(delta) = report.max_abs_delta() {
        println!("max |rev1 sim - analytical| = {delta}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { sweep } => {
            let overrides = Overrides { take_step: sweep.take_step, ..Default::default() };
            let config = load(&sweep.config, overrides)?;
            finish(&cmd_analyze(&config)?, &sweep.out_dir)
        }
        Command::Simulate { sweep, liquidity_step, seed, compare } => {
            let overrides = Overrides { take_step: sweep.take_step, liquidity_step, seed };
            let config = load(&sweep.config, overrides)?;
            finish(&cmd_simulate(&config, compare)?, &sweep.out_dir)
        }
        Command::GenTrace { n, mu, sigma, bias, seed, output } => {
            let spec = SyntheticSpec { n_trades: n, mu, sigma, bias, seed };
            let count = cmd_gen_trace(&spec, &output)?;
            log::info!("wrote {count} trades to {}", output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
