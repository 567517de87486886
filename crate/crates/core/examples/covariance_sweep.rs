//! Covariances of powers of two units in the same layer. Layer-1 units are
//! independent; deeper units are positively dependent through their shared
//! parents.
//!
//! cargo run --release --example covariance_sweep -- [n_samples]

use bnn_tails::covariance::{power_grid, sweep, CovarianceVerdict};
use bnn_tails::{sample_input, NetworkConfig, NonlinearitySpec};

fn main() -> bnn_tails::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let config = NetworkConfig::mlp(50, vec![50, 50, 50], NonlinearitySpec::Relu);
    let x = sample_input(config.input_dim, 3)?;
    let result = sweep(&config, &x, &[1, 2, 3], &power_grid(3), (0, 1), n, 3);

    println!("layer  s  t       estimate            se  verdict");
    for r in &result.reports {
        println!(
            "{:>5} {:>2} {:>2} {:>14.4e} {:>13.4e}  {}",
            r.layer, r.s, r.t, r.estimate, r.se, r.verdict
        );
    }
    for f in &result.failures {
        println!("layer {} ({}, {}): {}", f.layer, f.s, f.t, f.error);
    }
    println!("violations: {}", result.count(CovarianceVerdict::Violation));
    result.write_csv(std::io::stdout().lock()).ok();
    Ok(())
}
