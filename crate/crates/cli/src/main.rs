use autobalance_cli::config::{ConfigError, Experiment, ExperimentConfig};
use autobalance_cli::{aggregate, run_balance, run_evaluate, theta, RunOptions};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "autobalance",
    version,
    about = "Balance games towards a target response graph"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search the parameter space until the response graph matches the target.
    Balance {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Trials evaluated concurrently.
        #[arg(long)]
        parallel: Option<usize>,
        /// Trial budget; may be raised when resuming.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Measure one parameter vector against the target.
    Evaluate {
        /// Experiment config (TOML).
        config: PathBuf,
        /// Parameter vector, e.g. a best_theta.toml.
        #[arg(long)]
        theta: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the per-matchup table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Aggregate progression logs into a plot-ready CSV.
    Report {
        /// progression.csv files, one per run.
        #[arg(required = true)]
        progression: Vec<PathBuf>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(
    path: &Path,
    seed: Option<u64>,
    parallel: Option<usize>,
    max_iterations: Option<usize>,
) -> Result<Experiment, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = parallel {
        cfg.balance.parallel_width = p;
    }
    if let Some(m) = max_iterations {
        cfg.balance.max_iterations = m;
    }
    Experiment::new(cfg).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    autobalance::fsutil::write_atomic(path, text.as_bytes())
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Balance {
            config,
            seed,
            resume,
            parallel,
            max_iterations,
        } => {
            let exp = load(&config, seed, parallel, max_iterations)?;
            let opts = RunOptions {
                resume,
                stop_after: None,
            };
            let out = run_balance(&exp, &opts).map_err(|e| Failure::Runtime(e.to_string()))?;
            if let Some(r) = &out.report {
                print!("{}", r.render());
            }
            println!(
                "{} trials, best loss {}{}",
                out.progression.len(),
                out.best_loss,
                if out.converged { " (converged)" } else { "" }
            );
            println!("artifacts in {}", exp.output_dir().display());
            Ok(())
        }
        Command::Evaluate {
            config,
            theta: theta_path,
            seed,
            csv,
        } => {
            let exp = load(&config, seed, None, None)?;
            let theta = theta::load(&theta_path, &exp.space)
                .map_err(|e| Failure::Config(format!("{}: {e}", theta_path.display())))?;
            let report = run_evaluate(&exp, &theta).map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{}", report.render());
            if let Some(path) = csv {
                write_atomic(&path, &report.to_csv())?;
            }
            Ok(())
        }
        Command::Report { progression, out } => {
            let inputs = progression
                .iter()
                .map(|p| {
                    std::fs::read_to_string(p)
                        .map(|t| (p.display().to_string(), t))
                        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let csv = aggregate(&inputs).map_err(|e| Failure::Config(e.to_string()))?;
            match out {
                Some(path) => write_atomic(&path, &csv),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
