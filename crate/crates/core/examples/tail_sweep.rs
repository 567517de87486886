//! Estimates the tail parameter of one pre-nonlinearity per layer of a ReLU
//! network with both estimators, then checks the one-half increment between
//! consecutive layers.
//!
//! cargo run --release --example tail_sweep -- [n_samples]

use bnn_tails::tail::{estimate_theta_moments, estimate_theta_survival, moment_curve, recursion_check};
use bnn_tails::{sample_input, NetworkConfig, NonlinearitySpec, Sampler, UnitKind, UnitRef};

fn main() -> bnn_tails::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let config = NetworkConfig::mlp(100, vec![100, 100, 100], NonlinearitySpec::Relu);
    let x = sample_input(config.input_dim, 7)?;

    let targets: Vec<UnitRef> = (1..=3).map(|l| UnitRef::new(l, 0, UnitKind::Pre)).collect();
    let joint = Sampler::new(&config, &x)?.joint(&targets, n, 7)?;

    let mut moment = Vec::new();
    println!("layer  moment-slope       survival-slope");
    for (i, t) in targets.iter().enumerate() {
        let set = joint.unit_set(i);
        let m = estimate_theta_moments(&moment_curve(&set, 2, 10)?)?;
        let s = estimate_theta_survival(&set, 0.1)?;
        println!(
            "{:>5}  {:.3} +- {:.3}      {:.3} +- {:.4}",
            t.layer, m.theta_hat, m.se_theta, s.theta_hat, s.se_theta
        );
        moment.push(m);
    }
    for w in moment.windows(2) {
        let v = recursion_check(&w[0], &w[1])?;
        println!(
            "increment {:.3} (expected 0.5, tolerance {:.3}): {}",
            v.increment,
            v.tolerance,
            if v.pass { "pass" } else { "fail" }
        );
    }
    Ok(())
}
