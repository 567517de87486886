//! Tail estimates of a layer-2 unit before and after max and average pooling
//! over a region of four units.
//!
//! cargo run --release --example pooling -- [n_samples] [pre|post]

use bnn_tails::pooling::{pooled_tail_check, PoolingKind, PoolingSpec};
use bnn_tails::tail::Estimator;
use bnn_tails::{sample_input, NetworkConfig, NonlinearitySpec, UnitKind};

fn main() -> bnn_tails::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let config = NetworkConfig::mlp(100, vec![100, 100], NonlinearitySpec::Relu);
    let x = sample_input(config.input_dim, 5)?;
    for kind in [PoolingKind::Max, PoolingKind::Average] {
        let spec = PoolingSpec::new(kind, 4)?;
        for estimator in [Estimator::default(), Estimator::survival()] {
            let c = pooled_tail_check(&config, &x, 2, &[0, 1, 2, 3], &spec, kind_arg(), &estimator, n, 5)?;
            println!(
                "{kind:<8} {:<15} before {:.3}  after {:.3}  tolerance {:.3}  {}",
                c.before.method,
                c.before.theta_hat,
                c.after.theta_hat,
                c.tolerance,
                if c.pass { "pass" } else { "fail" }
            );
        }
    }
    Ok(())
}

fn kind_arg() -> UnitKind {
    std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(UnitKind::Post)
}
