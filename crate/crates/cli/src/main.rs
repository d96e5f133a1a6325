use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use salience::data::Generator;
use salience_cli::commands;
use salience_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "salience", version, about = "Learned fixation prediction")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Recompute outputs that are already up to date.
    #[arg(long, global = true)]
    force: bool,
    /// Overrides the sampling seed and evaluates this single seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract feature stacks for every image of the dataset.
    Features,
    /// Train one model on the whole dataset.
    Train,
    /// Predict saliency maps with a trained model.
    Predict {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// An image, a dataset directory or a stored feature stack.
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Run the configured experiment and write the report.
    Eval,
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, default_value = "mixed")]
        generator: Generator,
        #[arg(long, default_value_t = 100)]
        images: usize,
        #[arg(long, value_name = "DIR")]
        output: PathBuf,
    },
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_deref().context("--config is required for this command")?;
    RunConfig::load(path, cli.seed)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Features => {
            commands::cmd_features(&config(&cli)?, cli.force)?;
        }
        Command::Train => {
            commands::cmd_train(&config(&cli)?)?;
        }
        Command::Predict { model, input } => {
            commands::cmd_predict(&config(&cli)?, model, input.as_deref())?;
        }
        Command::Eval => {
            commands::cmd_eval(&config(&cli)?)?;
        }
        Command::Synth {
            generator,
            images,
            output,
        } => {
            commands::cmd_synth(*generator, *images, cli.seed.unwrap_or(0), output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
