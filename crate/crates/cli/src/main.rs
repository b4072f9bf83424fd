//! Command-line driver for search-session simulation experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

mod artifact;
mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    /// Config-file problems are usage errors (exit 2).
    pub fn usage(err: anyhow::Error) -> Self {
        CliError::Usage(format!("{err:#}"))
    }
}

#[derive(Parser)]
#[command(
    name = "searchsim",
    version,
    about = "Simulate and evaluate search sessions: an LLM agent loop plus classical query, click, and stopping baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the first seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's run.out_dir, then ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's backend kind.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendChoice {
    Mock,
    Remote,
}

impl From<BackendChoice> for config::BackendKind {
    fn from(choice: BackendChoice) -> Self {
        match choice {
            BackendChoice::Mock => config::BackendKind::Mock,
            BackendChoice::Remote => config::BackendKind::Remote,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate, filter, or synthesize datasets.
    Dataset {
        #[command(subcommand)]
        action: DatasetCommand,
    },
    /// Run the agent over logged tasks, replaying logged SERPs.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Fit a click model, stopping rule, or the query mixture model.
    Train {
        /// pbm | ubm | dcm | dbn | pbm-regression | fixed-depth |
        /// frustration | satisfaction | combined | query-model
        #[arg(long)]
        family: String,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        tasks: Option<PathBuf>,
        /// EM iterations.
        #[arg(long, default_value_t = 100)]
        iters: usize,
        /// Early-stop tolerance on the log-likelihood improvement.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Seed for seeded fitting procedures (query-model grid search).
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Artifact file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the configured subjects against logged sessions.
    Eval {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare full-context and context-ablated agent variants.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Parse a dataset and print the error report.
    Validate {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        tasks: Option<PathBuf>,
    },
    /// Apply the filtering rules and write the filtered dataset.
    Filter {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        tasks: Option<PathBuf>,
        /// Task ids to exclude, comma separated.
        #[arg(long, value_delimiter = ',')]
        exclude_tasks: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from the config's [synth] section.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dataset { action } => match action {
            DatasetCommand::Validate { sessions, tasks } => {
                commands::dataset::validate(&sessions, tasks.as_deref()).map_err(CliError::Runtime)
            }
            DatasetCommand::Filter { sessions, tasks, exclude_tasks, out } => {
                commands::dataset::filter(&sessions, tasks.as_deref(), &exclude_tasks, &out)
                    .map_err(CliError::Runtime)
            }
            DatasetCommand::Synth { config, seed, out } => {
                commands::dataset::synth(&config, seed, &out).map_err(CliError::Runtime)
            }
        },
        Command::Simulate { run } => {
            commands::simulate::run(&run.config, run.seed, run.out.as_deref(), run.backend.map(Into::into))
                .map_err(CliError::Runtime)
        }
        Command::Train { family, sessions, tasks, iters, tol, seed, out } => {
            commands::train::run(&family, &sessions, tasks.as_deref(), iters, tol, seed, &out)
        }
        Command::Eval { run } => {
            commands::eval::run(&run.config, run.seed, run.out.as_deref(), run.backend.map(Into::into))
        }
        Command::Ablate { run } => {
            commands::ablate::run(&run.config, run.seed, run.out.as_deref(), run.backend.map(Into::into))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
