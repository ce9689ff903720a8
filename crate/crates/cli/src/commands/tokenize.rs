use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use vulnlex::lexer::tokenize_bytes;

#[derive(Args, Debug)]
pub struct TokenizeArgs {
    /// Python source file; reads stdin when omitted
    file: Option<PathBuf>,
    /// Print only the lexemes, space-separated on one line
    #[arg(long)]
    lexemes: bool,
}

pub fn run(args: TokenizeArgs) -> Result<ExitCode> {
    let bytes = match &args.file {
        Some(path) => std::fs::read(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let mut buf = Vec::new();
            std::io::stdin().read_to_end(&mut buf).context("reading stdin")?;
            buf
        }
    };
    let stream = tokenize_bytes(&bytes)?;
    if args.lexemes {
        println!("{}", stream.lexemes().collect::<Vec<_>>().join(" "));
    } else {
        for token in &stream.tokens {
            println!("{}\t{}", token.kind.as_str(), token.lexeme);
        }
    }
    Ok(ExitCode::SUCCESS)
}
