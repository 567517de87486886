//! Weight decay and the layer-wise unit penalties `sum |U(l)|^(2/l)` for one
//! draw from the prior.

use bnn_tails::penalty::unit_penalty;
use bnn_tails::{forward, sample_input, sample_weights, NetworkConfig, NonlinearitySpec};

fn main() -> bnn_tails::Result<()> {
    let config = NetworkConfig::mlp(10, vec![8, 8, 8, 8], NonlinearitySpec::Relu);
    let x = sample_input(config.input_dim, 11)?;
    let weights = sample_weights(&config, 11)?;
    let pass = forward(&weights, &x, &config)?;
    let units: Vec<Vec<f64>> = pass.layers.iter().map(|l| l.pre.clone()).collect();
    print!("{}", unit_penalty(&units)?.with_weights(&weights).to_report());
    Ok(())
}
