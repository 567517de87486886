//! Gaussian-prior feed-forward networks and Monte-Carlo unit sampling.

mod config;
mod sampler;
mod samples;
mod weights;

pub use config::{NetworkConfig, WeightStd};
pub use sampler::{sample_units, JointSamples, Propagation, Sampler, UnitRef, DEFAULT_CHUNK_SIZE};
pub use samples::{Provenance, SignedLog, UnitKind, UnitSampleSet};
pub use weights::{
    forward, sample_input, sample_weights, ForwardPass, LayerActivations, Matrix, WeightSet,
};
