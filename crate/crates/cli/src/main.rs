//! Command-line interface for the inverse-decode engine.
//!
//! Subcommands: `train` (fit the n-gram backend), `generate` (beam search
//! for one prompt), `selftrain` (generate-and-fine-tune loop), `evalstats`
//! (rating statistics), `validate-config`. Exit codes: 0 ok, 2 configuration
//! or validation error, 3 I/O error, 4 search/self-training failure, 5
//! backend or protocol error.

mod commands;
mod config;
mod record;

use clap::{Parser, Subcommand};

use inverse_decode::EngineError;

#[derive(Parser)]
#[command(
    name = "inverse-decode",
    version,
    about = "Controllable text generation via inverse prompt scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the n-gram backend on a JSONL corpus.
    Train(commands::train::TrainArgs),
    /// Generate text for a prompt with the configured scorer.
    Generate(commands::generate::GenerateArgs),
    /// Run the generate-and-fine-tune self-training loop.
    Selftrain(commands::selftrain::SelftrainArgs),
    /// Summarize human rating records and compare methods.
    Evalstats(commands::evalstats::EvalstatsArgs),
    /// Validate a run configuration and print its digest.
    ValidateConfig(commands::validate::ValidateArgs),
}

fn exit_code(err: &EngineError) -> i32 {
    match err {
        EngineError::Config(_) | EngineError::Template { .. } | EngineError::Score(_) => 2,
        EngineError::Io(_) => 3,
        EngineError::Search { .. } | EngineError::SelfTrain(_) => 4,
        EngineError::Backend { .. } | EngineError::Protocol(_) => 5,
    }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(args) => commands::train::run(args),
        Command::Generate(args) => commands::generate::run(args),
        Command::Selftrain(args) => commands::selftrain::run(args),
        Command::Evalstats(args) => commands::evalstats::run(args),
        Command::ValidateConfig(args) => commands::validate::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
