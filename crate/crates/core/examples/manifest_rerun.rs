//! Runs a small tail sweep, then replays it from its manifest and checks
//! that every CSV is byte-identical.

use bnn_tails::experiment::{execute, rerun, Command, RunSpec, MANIFEST_FILE};
use bnn_tails::{NetworkConfig, NonlinearitySpec};

fn main() -> bnn_tails::Result<()> {
    let config = NetworkConfig::mlp(20, vec![20, 20], NonlinearitySpec::Relu);
    let spec = RunSpec::new(Command::tail_sweep(config, 50_000), 42);
    let dir = std::env::temp_dir().join("bnn-tails-manifest-demo");
    let first = dir.join("first");
    let (_, manifest) = execute(&spec, &first)?;
    println!("{} wrote {} files", manifest.command, manifest.artifacts.len());
    let report = rerun(&first.join(MANIFEST_FILE), &dir.join("second"))?;
    println!("identical: {}", report.identical());
    Ok(())
}
