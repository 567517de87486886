//! The default sampler draws each unit from its exact conditional law given
//! the previous layer. This compares it with explicit weight draws and a full
//! forward pass using a two-sample Kolmogorov-Smirnov test.
//!
//! cargo run --release --example propagation -- [n_samples]

use bnn_tails::tail::ks_two_sample;
use bnn_tails::{sample_input, NetworkConfig, NonlinearitySpec, Propagation, Sampler, UnitKind};

fn main() -> bnn_tails::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let config = NetworkConfig::mlp(30, vec![30, 30, 30], NonlinearitySpec::Elu { alpha: 1.0 });
    let x = sample_input(config.input_dim, 2)?;
    for layer in 1..=3 {
        let fast = Sampler::new(&config, &x)?.units(layer, 4, UnitKind::Post, n, 1)?;
        let slow = Sampler::new(&config, &x)?
            .propagation(Propagation::ExplicitWeights)
            .units(layer, 4, UnitKind::Post, n, 2)?;
        let ks = ks_two_sample(&fast.decoded(), &slow.decoded())?;
        println!("layer {layer}: D = {:.4}, p = {:.3}", ks.statistic, ks.p_value);
    }
    Ok(())
}
