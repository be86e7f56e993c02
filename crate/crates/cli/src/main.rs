//! `spikeflag`: generate data, encode, train, evaluate, search and report.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::UsageError;

#[derive(Parser)]
#[command(name = "spikeflag", version, about = "RFI flagging with spiking neural networks")]
struct Cli {
    /// TOML file with one table per subcommand ([train], [search], ...); flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Where to write the run manifest instead of the default location.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Generate(commands::GenerateArgs),
    /// Encode a spectrogram or one of its patches into spikes.
    Encode(commands::EncodeArgs),
    /// Train one model and write its checkpoint and history.
    Train(commands::TrainArgs),
    /// Score a checkpoint, or the all-false predictor, on the test split.
    Eval(commands::EvalArgs),
    /// Random hyperparameter search with a resumable trial store.
    Search(commands::SearchArgs),
    /// Retrain one configuration under several seeds.
    Repeat(commands::RepeatArgs),
    /// Summarize record files as mean and deviation per method.
    Report(commands::ReportArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<spikeflag_core::Error>() {
        Some(spikeflag_core::Error::Config(_) | spikeflag_core::Error::Argument(_)) => 2,
        _ => 1,
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain().map(|c| c.to_string()) {
        if !out.ends_with(&cause) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&cause);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let ctx = commands::Context {
        config: cli.config,
        manifest: cli.manifest,
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Encode(a) => commands::encode(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Eval(a) => commands::eval(&ctx, a),
        Command::Search(a) => commands::search(&ctx, a),
        Command::Repeat(a) => commands::repeat(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
