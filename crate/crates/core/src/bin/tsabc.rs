use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tsabc::config::{parse_config, ExperimentConfig, Task};
use tsabc::data::load_trace_csv;
use tsabc::error::Error;
use tsabc::experiment::{diagnose, run_experiment_chains, simulate_to};

#[derive(Parser)]
#[command(name = "tsabc", version, about = "Structure-preserving ABC samplers for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Independent chains, one RNG stream each.
    #[arg(long, default_value_t = 1)]
    chains: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic series to `data.csv`.
    Simulate(Common),
    /// Run an i.i.d. or observation-driven ABC-MCMC kernel.
    Mcmc(Common),
    /// Run one ABC filter at a fixed theta.
    Filter(Common),
    /// Run particle-marginal Metropolis-Hastings.
    Pmmh(Common),
    /// Summaries, ACF and KDE of an existing trace CSV.
    Diagnose {
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Data { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn run_task(common: &Common, task: Task, name: &str) -> Result<(), Failure> {
    let cfg = load(common)?;
    if cfg.algorithm.task() != task {
        return Err(Failure::Config(format!(
            "config error at `algorithm`: {} cannot run under `{name}`",
            cfg.algorithm.as_str()
        )));
    }
    let art = run_experiment_chains(&cfg, common.chains)?;
    for f in &art.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => {
            let path = simulate_to(&load(&c)?)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Mcmc(c) => run_task(&c, Task::Mcmc, "mcmc"),
        Command::Filter(c) => run_task(&c, Task::Filter, "filter"),
        Command::Pmmh(c) => run_task(&c, Task::Pmmh, "pmmh"),
        Command::Diagnose { trace, common } => {
            let cfg = if common.config.is_some() { Some(load(&common)?) } else { None };
            let out = common
                .out
                .clone()
                .or_else(|| cfg.as_ref().map(|c| c.output.dir.clone()))
                .unwrap_or_else(|| PathBuf::from("."));
            let (burn_in, lags, points) = cfg
                .as_ref()
                .map_or((0, 50, 256), |c| (c.output.burn_in, c.output.acf_lags, c.output.kde_points));
            let t = load_trace_csv(&trace)?;
            for f in diagnose(&t, &out, burn_in, lags, points)? {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
    }
}
