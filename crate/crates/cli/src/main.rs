//! Command-line front end for the banditlab experiment harness.
//!
//! Exit status is 0 on success, 2 when the arguments or the configuration
//! file are invalid, and 1 when an experiment fails at run time.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use banditlab::engine::BanditInstance;
use banditlab::harness::{
    complexity_report, parse_config, run_experiment, ExperimentConfig, ExperimentKind,
};
use banditlab::{ArmFamily, Error};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "banditlab", version, about = "Stochastic bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cumulative pseudo-regret of an index policy
    Regret(RunArgs),
    /// Track-and-Stop best-arm identification
    Bai(RunArgs),
    /// Empirical violation rates of KL and Hoeffding upper bounds
    Coverage(RunArgs),
    /// Lai-Robbins constant, characteristic time and optimal weights
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the file
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the CSV and JSON outputs, overriding `out_dir`
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    /// TOML experiment file; exclusive with --means
    #[arg(long, conflicts_with_all = ["means", "family", "sigma2"])]
    config: Option<PathBuf>,
    /// Comma-separated arm means
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    means: Option<Vec<f64>>,
    #[arg(long, default_value = "bernoulli")]
    family: String,
    /// Variance of Gaussian arms
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }

    fn runtime(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(
    path: &Path,
    expected: ExperimentKind,
    seed: Option<u64>,
) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text).map_err(Failure::usage)?;
    if config.experiment != expected {
        return Err(Failure::Usage(format!(
            "{} describes a {} experiment, not {expected}",
            path.display(),
            config.experiment
        )));
    }
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate().map_err(Failure::usage)?;
    Ok(config)
}

fn run_file(kind: ExperimentKind, args: RunArgs) -> Result<(), Failure> {
    let config = load_config(&args.config, kind, args.seed)?;
    let output = run_experiment(&config).map_err(Failure::runtime)?;
    if let Some(dir) = args.out.or_else(|| config.out_dir.clone()) {
        output.write_to(&dir).map_err(Failure::runtime)?;
    }
    println!("{}", output.summary_json().map_err(Failure::runtime)?);
    Ok(())
}

fn run_complexity(args: ComplexityArgs) -> Result<(), Failure> {
    if let Some(path) = args.config {
        return run_file(
            ExperimentKind::Complexity,
            RunArgs {
                config: path,
                seed: None,
                out: args.out,
            },
        );
    }
    let means = args
        .means
        .ok_or_else(|| Failure::Usage("either --config or --means is required".into()))?;
    let family = ArmFamily::from_name(&args.family, args.sigma2).map_err(Failure::usage)?;
    let instance = BanditInstance::new(family, means).map_err(Failure::usage)?;
    let json = serde_json::to_string_pretty(&complexity_report(&instance))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir)
            .and_then(|_| std::fs::write(dir.join("complexity_summary.json"), format!("{json}\n")))
            .map_err(|e| Failure::Runtime(format!("cannot write to {}: {e}", dir.display())))?;
    }
    println!("{json}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Regret(args) => run_file(ExperimentKind::Regret, args),
        Command::Bai(args) => run_file(ExperimentKind::Bai, args),
        Command::Coverage(args) => run_file(ExperimentKind::Coverage, args),
        Command::Complexity(args) => run_complexity(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
