use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rat_cli::commands;
use rat_cli::config::{parse_config, ExperimentConfig};
use rat_cli::error::CliResult;
use rat_core::eval::SweepAxis;

/// Regional adversarial training experiments: train models, evaluate them
/// under l-infinity attacks, and export the analysis protocol as CSV.
#[derive(Parser)]
#[command(name = "rat", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Iterations,
    Epsilon,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model (st | sat | rat per the config) and write metrics + checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Rayon worker threads (ignored in sequential builds).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Clean/FGSM/PGD/CW accuracy of a checkpoint on the test split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Robust accuracy along PGD iterations or budgets.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated axis values, e.g. "1,10,20" or "0.0,0.05,0.1".
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Loss vs magnitude scale along one sampled direction of a test point.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Test-set sample index to probe.
        #[arg(long)]
        sample: usize,
        /// Direction mixing weight on the first/end segment.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Standard and robust train-minus-test generalization gaps.
    Gaps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn load(config: &PathBuf, seed: Option<u64>, threads: Option<usize>) -> CliResult<ExperimentConfig> {
    if let Some(n) = threads {
        if let Err(e) = rat_core::parallel::configure_thread_pool(n) {
            eprintln!("warning: could not configure thread pool: {e}");
        }
    }
    let mut cfg = parse_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn parse_values(values: &str) -> CliResult<Vec<f64>> {
    values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| rat_cli::CliError::Runtime(format!("bad sweep value '{v}': {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            seed,
            threads,
        } => {
            let cfg = load(&config, seed, threads)?;
            let outputs = commands::cmd_train(&cfg, &out)?;
            println!("metrics: {}", outputs.metrics_csv.display());
            println!("final checkpoint: {}", outputs.final_checkpoint.display());
            println!("best checkpoint: {}", outputs.best_checkpoint.display());
        }
        Command::Eval {
            config,
            checkpoint,
            out,
            seed,
            threads,
        } => {
            let cfg = load(&config, seed, threads)?;
            let path = commands::cmd_eval(&checkpoint, &cfg, &out)?;
            println!("eval report: {}", path.display());
        }
        Command::Sweep {
            config,
            checkpoint,
            axis,
            values,
            out,
            seed,
            threads,
        } => {
            let cfg = load(&config, seed, threads)?;
            let axis = match axis {
                AxisArg::Iterations => SweepAxis::PgdIterations,
                AxisArg::Epsilon => SweepAxis::PgdEpsilon,
            };
            let values = parse_values(&values)?;
            let path = commands::cmd_sweep(&checkpoint, &cfg, axis, &values, &out)?;
            println!("sweep: {}", path.display());
        }
        Command::Probe {
            config,
            checkpoint,
            sample,
            lambda,
            out,
            seed,
            threads,
        } => {
            let cfg = load(&config, seed, threads)?;
            let path = commands::cmd_probe(&checkpoint, &cfg, sample, lambda, &out)?;
            println!("probe: {}", path.display());
        }
        Command::Gaps {
            config,
            checkpoint,
            out,
            seed,
            threads,
        } => {
            let cfg = load(&config, seed, threads)?;
            let path = commands::cmd_gaps(&checkpoint, &cfg, &out)?;
            println!("gaps: {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
