//! Searches for linear envelope constants of each built-in activation and
//! verifies them on a dense grid.

use bnn_tails::nonlinearity::{search_envelope_constants, EnvelopeGrid, EnvelopeSearch};
use bnn_tails::NonlinearitySpec;

fn main() -> bnn_tails::Result<()> {
    let grid = EnvelopeGrid::default();
    for spec in [
        "relu",
        "prelu:0.1",
        "elu:1",
        "selu:1.0507,1.6733",
        "tanh",
        "sigmoid",
        "identity",
    ] {
        let spec: NonlinearitySpec = spec.parse()?;
        match search_envelope_constants(&spec, &grid)? {
            EnvelopeSearch::Certified(w) => {
                let c = w.constants;
                println!(
                    "{spec:<20} holds={}  |phi(u)| >= {} + {}|u| on {}, |phi(u)| <= {} + {}|u|",
                    w.holds(),
                    c.c1,
                    c.d1,
                    c.side,
                    c.c2,
                    c.d2
                );
            }
            EnvelopeSearch::Bounded { sup_abs, .. } => {
                println!("{spec:<20} bounded, sup |phi| = {sup_abs}");
            }
        }
    }
    Ok(())
}
