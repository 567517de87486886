//! Monte-Carlo tools for the tail behavior of units in neural networks with
//! i.i.d. Gaussian weight priors.
//!
//! Units of layer `l` of a ReLU-like network are sub-Weibull with optimal
//! tail parameter `l / 2`: their `k`-th norms grow like `k^(l/2)`. The
//! modules here sample those units, estimate the tail parameter two ways,
//! check the covariance and pooling properties that go with it, and compute
//! the matching layer-wise `L^(2/l)` penalties.

pub mod covariance;
pub mod digest;
pub mod error;
pub mod experiment;
pub mod network;
pub mod nonlinearity;
pub mod penalty;
pub mod pooling;
pub mod rng;
pub mod tail;

pub use error::{Error, Result};
pub use network::{
    forward, sample_input, sample_units, sample_weights, NetworkConfig, Propagation, Sampler,
    UnitKind, UnitRef, UnitSampleSet, WeightSet, WeightStd,
};
pub use nonlinearity::NonlinearitySpec;
