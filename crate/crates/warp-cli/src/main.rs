use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use warp_cli::commands::{cmd_analyze, cmd_eval, cmd_generate, cmd_train};
use warp_cli::{exit_code, resolve_config};

#[derive(Parser)]
#[command(
    name = "warp",
    about = "Weight-space linear RNN experiments: generate data, train, evaluate, analyze"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named built-in configuration.
    #[arg(long)]
    preset: Option<String>,
    /// Override both dataset and training seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the experiment output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write train/test dataset files and a content-hash manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Overwrite existing dataset files.
        #[arg(long)]
        force: bool,
    },
    /// Train a model, checkpointing at the configured cadence.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the saved checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Evaluate the checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
    },
    /// Emit weight-trajectory diagnostics for the checkpoint.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, Box<dyn FnOnce(&warp_cli::config::ExperimentConfig) -> warp_core::error::Result<()>>) =
        match &cli.cmd {
            Cmd::Generate { common, force } => {
                let force = *force;
                (common, Box::new(move |cfg| cmd_generate(cfg, force)))
            }
            Cmd::Train { common, resume } => {
                let resume = *resume;
                (common, Box::new(move |cfg| cmd_train(cfg, resume)))
            }
            Cmd::Eval { common } => (common, Box::new(cmd_eval)),
            Cmd::Analyze { common } => (common, Box::new(cmd_analyze)),
        };
    let result = resolve_config(
        common.config.as_ref(),
        common.preset.as_deref(),
        common.seed,
        common.out.as_ref(),
    )
    .and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
