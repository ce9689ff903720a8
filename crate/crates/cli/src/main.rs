//! `vulnlex`: train and apply lexical vulnerability detectors for Python.
//!
//! Exit codes: 0 success, 1 error, 2 when `scan` reports a finding.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigFile;

#[derive(Parser, Debug)]
#[command(name = "vulnlex", version, about = "Lexical vulnerability detection for Python source")]
#[command(after_help = "Examples:
  vulnlex embed --dataset data.jsonl --out out
  vulnlex train --dataset data.jsonl --class xss --model bilstm --embedding out/embedding.txt --out out
  vulnlex evaluate --model out/model-xss-bilstm.json --dataset data.jsonl --embedding out/embedding.txt --out out
  vulnlex scan --model out/model-xss-bilstm.json --embedding out/embedding.txt src/")]
struct Cli {
    /// INI configuration file; command-line flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tokenize a dataset and train word2vec token embeddings
    Embed(commands::embed::EmbedArgs),
    /// Train one classifier for one vulnerability class
    Train(commands::train::TrainArgs),
    /// Score the test and/or validation partition with a trained model
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Score Python files; exits 2 if any file is labeled vulnerable
    Scan(commands::scan::ScanArgs),
    /// Print the token stream of a Python file (or stdin)
    Tokenize(commands::tokenize::TokenizeArgs),
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Embed(args) => commands::embed::run(args, &config),
        Command::Train(args) => commands::train::run(args, &config),
        Command::Evaluate(args) => commands::evaluate::run(args, &config),
        Command::Scan(args) => commands::scan::run(args, &config),
        Command::Tokenize(args) => commands::tokenize::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors exit 1: exit code 2 is reserved for scan findings.
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
