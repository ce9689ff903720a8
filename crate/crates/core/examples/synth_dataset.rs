//! Writes a synthetic JSON Lines dataset to stdout.
//!
//! ```text
//! cargo run -p vulnlex-core --example synth_dataset -- <total> [seed] [class]
//! ```
//!
//! Without a class the samples are spread evenly over all seven classes.

use std::process::ExitCode;

use vulnlex::corpus::synthetic::generate;
use vulnlex::corpus::{write_dataset, VulnClass};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parsed = (|| -> Result<_, String> {
        let total: usize = args.first().ok_or("missing <total>")?.parse().map_err(|e| format!("total: {e}"))?;
        let seed: u64 = args.get(1).map_or(Ok(1), |s| s.parse()).map_err(|e| format!("seed: {e}"))?;
        let classes: Vec<VulnClass> = match args.get(2) {
            Some(c) => vec![c.parse().map_err(|e| format!("{e}"))?],
            None => VulnClass::ALL.to_vec(),
        };
        Ok((total, seed, classes))
    })();
    let (total, seed, classes) = match parsed {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut samples = Vec::new();
    for (i, &class) in classes.iter().enumerate() {
        let n = total / classes.len() + usize::from(i < total % classes.len());
        samples.extend(generate(class, n, seed + i as u64));
    }
    match write_dataset(&samples) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
