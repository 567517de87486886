//! Log-survival curves of standardized pre-nonlinearities at layers 1, 2, 3
//! and 10 of a ten-layer ReLU network, written as CSV files. Deeper layers
//! have heavier tails.
//!
//! cargo run --release --example figure3 -- [out_dir]

use std::path::PathBuf;

use bnn_tails::experiment::{execute, Command, RunSpec};

fn main() -> bnn_tails::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "figure3-out".into()).into();
    let spec = RunSpec::new(Command::figure3_default(100_000), 0);
    let (run, manifest) = execute(&spec, &out)?;
    for line in &run.summary {
        println!("{line}");
    }
    for a in &manifest.artifacts {
        println!("{}  {}", &a.sha256[..12], a.file);
    }
    println!("{}", run.artifact("ordering.csv").map(|a| a.as_str()).unwrap_or(""));
    Ok(())
}
