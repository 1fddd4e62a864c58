//! `vidspeech`: synthesize paired data, train the model, sample speech from
//! silent frames and score the results.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numerical abort.

mod commands;
mod config;
mod error;
mod manifest;
mod melimage;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{DiversityArgs, EvaluateArgs, GenerateArgs, SynthArgs, TrainArgs};

#[derive(Parser)]
#[command(name = "vidspeech", version, about = "Stochastic speech generation from silent video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic paired dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset directory.
    Train(TrainArgs),
    /// Generate one waveform (plus a mel image) from a frame directory.
    Generate(GenerateArgs),
    /// Draw several samples for one frame directory and measure their spread.
    Diversity(DiversityArgs),
    /// Score generated WAVs against references (STOI, ESTOI, mel L1).
    Evaluate(EvaluateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Generate(a) => commands::generate(a),
        Command::Diversity(a) => commands::diversity(a),
        Command::Evaluate(a) => commands::evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
