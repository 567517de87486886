//! Compares empirical norms of Gaussian samples with the closed form
//! `E|X|^k = sigma^k 2^(k/2) Gamma((k+1)/2) / sqrt(pi)`.

use bnn_tails::experiment::gaussian_samples;
use bnn_tails::tail::{empirical_log_norm, gaussian_norm_oracle};
use bnn_tails::UnitSampleSet;

fn main() -> bnn_tails::Result<()> {
    let sigma = 2.5;
    let set = UnitSampleSet::synthetic("gaussian", &gaussian_samples(sigma, 1_000_000, 1));
    println!(" k   empirical      exact   rel.err");
    for k in 1..=8 {
        let (log_norm, _) = empirical_log_norm(&set, k)?;
        let exact = gaussian_norm_oracle(sigma, k)?;
        let emp = log_norm.exp();
        println!("{k:>2} {emp:>11.5} {exact:>10.5} {:>9.2e}", (emp - exact).abs() / exact);
    }
    Ok(())
}
