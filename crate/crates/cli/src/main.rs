use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riskmppi_cli::{run, validate_estimator, ExperimentConfig, Planner};

#[derive(Parser)]
#[command(name = "riskmppi", version, about = "Corridor benchmarks for risk-aware MPPI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured batch of episodes and write traces and tables.
    Run(RunArgs),
    /// Compare the Monte Carlo estimator against quadrature on random scenes.
    ValidateEstimator(EstimatorArgs),
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `mppi.samples=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this planner instead of the configured list.
    #[arg(long, value_enum)]
    planner: Option<Planner>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value_t = 1000)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(o: &Overrides, extra: Vec<String>) -> anyhow::Result<ExperimentConfig> {
    let mut set = o.set.clone();
    set.extend(extra);
    match &o.config {
        Some(path) => ExperimentConfig::load(path, &set),
        None => ExperimentConfig::from_toml_str("", &set),
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut extra = Vec::new();
            if let Some(t) = args.trials {
                extra.push(format!("experiment.trials={t}"));
            }
            if let Some(s) = args.seed {
                extra.push(format!("experiment.seed={s}"));
            }
            if let Some(out) = &args.out {
                extra.push(format!("experiment.out={:?}", out.display().to_string()));
            }
            if let Some(p) = args.planner {
                extra.push(format!("experiment.planners=[\"{}\"]", p.name()));
            }
            let config = load(&args.overrides, extra)?;
            let out = config.experiment.out.clone();
            let rows = run(&config, &out)?;
            print!("{}", riskmppi_cli::run::summary_table(&rows));
            eprintln!("results in {}", out.display());
        }
        Command::ValidateEstimator(args) => {
            anyhow::ensure!(args.scenes >= 1, "--scenes must be at least 1");
            let config = load(&args.overrides, Vec::new())?;
            println!("{}", validate_estimator(args.scenes, args.seed, &config.risk));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
