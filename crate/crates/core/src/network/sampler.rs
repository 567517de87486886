//! Chunked, seed-deterministic Monte-Carlo sampling of unit values.
//!
//! Each sample is an independent draw of the whole weight prior followed by
//! a forward pass of the fixed input. Two propagation routes are available:
//!
//! * `Marginal` draws `g(l)` directly from its conditional law. Given
//!   `h(l-1)`, the rows of `W(l)` are i.i.d. `N(0, sigma^2 I)`, so the units
//!   of `g(l)` are i.i.d. `N(0, sigma^2 |h(l-1)|^2)`. The joint law of all
//!   layers is unchanged while the cost drops from `H(l-1) H(l)` to `H(l)`
//!   normal draws per layer.
//! * `ExplicitWeights` materializes a `WeightSet` per sample and calls
//!   `forward`. It is kept as the independent reference route.
//!
//! Sample `i` draws from stream `i` of the seed, so its value depends only on
//! `(config, x, seed, i)`: not on chunking, thread count, or which other
//! units were requested alongside it. Chunks of `chunk_size` samples are the
//! unit of parallel work and are merged in index order.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::samples::{Provenance, SignedLog, UnitKind, UnitSampleSet};
use super::weights::{forward, sample_weights_with};
use crate::digest::hash_f64s;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

pub const DEFAULT_CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Propagation {
    #[default]
    Marginal,
    ExplicitWeights,
}

/// A unit of the network: 1-based layer, 0-based index within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnitRef {
    pub layer: usize,
    pub unit: usize,
    pub kind: UnitKind,
}

impl UnitRef {
    pub fn new(layer: usize, unit: usize, kind: UnitKind) -> Self {
        UnitRef { layer, unit, kind }
    }
}

/// Jointly drawn values of several units, one column per target.
///
/// Columns hold the values the arithmetic produced, i.e. in rescaled units
/// when the config rescales; `log_rescale[i]` is the log of the factor
/// separating column `i` from the true network values.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSamples {
    pub targets: Vec<UnitRef>,
    pub columns: Vec<Vec<f64>>,
    pub log_rescale: Vec<f64>,
    pub config_hash: String,
    pub input_hash: String,
    pub seed: u64,
}

impl JointSamples {
    pub fn n_samples(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        Provenance {
            config_hash: self.config_hash.clone(),
            input_hash: self.input_hash.clone(),
            seed: self.seed,
            log_rescale: self.log_rescale[i],
        }
    }

    /// Column `i` as a sample set on the true (unrescaled) scale.
    pub fn unit_set(&self, i: usize) -> UnitSampleSet {
        let t = self.targets[i];
        let shift = self.log_rescale[i];
        let values = self.columns[i]
            .iter()
            .map(|&v| {
                let mut s = SignedLog::from_f64(v);
                s.log_mag -= shift;
                s
            })
            .collect();
        UnitSampleSet {
            layer: t.layer,
            kind: t.kind,
            unit_index: t.unit,
            values,
            provenance: self.provenance(i),
        }
    }

    /// Applies `f` row-wise across the columns `idx`, e.g. to pool a region.
    pub fn combine(&self, idx: &[usize], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut row = vec![0.0; idx.len()];
        (0..self.n_samples())
            .map(|r| {
                for (slot, &c) in row.iter_mut().zip(idx) {
                    *slot = self.columns[c][r];
                }
                f(&row)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    config: &'a NetworkConfig,
    x: &'a [f64],
    propagation: Propagation,
    chunk_size: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(config: &'a NetworkConfig, x: &'a [f64]) -> Result<Self> {
        config.validate()?;
        if x.len() != config.input_dim {
            return Err(Error::invalid(format!(
                "input has length {}, config expects {}",
                x.len(),
                config.input_dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("input has non-finite entries"));
        }
        Ok(Sampler {
            config,
            x,
            propagation: Propagation::Marginal,
            chunk_size: DEFAULT_CHUNK_SIZE,
        })
    }

    pub fn propagation(mut self, p: Propagation) -> Self {
        self.propagation = p;
        self
    }

    pub fn chunk_size(mut self, size: usize) -> Self {
        self.chunk_size = size.max(1);
        self
    }

    fn check_target(&self, t: &UnitRef) -> Result<()> {
        if t.layer == 0 || t.layer > self.config.depth() {
            return Err(Error::invalid(format!(
                "layer {} outside 1..={}",
                t.layer,
                self.config.depth()
            )));
        }
        if t.unit >= self.config.width(t.layer) {
            return Err(Error::invalid(format!(
                "unit {} outside layer {} of width {}",
                t.unit,
                t.layer,
                self.config.width(t.layer)
            )));
        }
        Ok(())
    }

    fn log_rescale(&self, t: &UnitRef) -> f64 {
        let upto = match t.kind {
            UnitKind::Pre => t.layer - 1,
            UnitKind::Post => t.layer,
        };
        (1..=upto).map(|l| self.config.rescale_factor(l).ln()).sum()
    }

    /// Draws `n` joint samples of `targets`.
    pub fn joint(&self, targets: &[UnitRef], n: usize, seed: u64) -> Result<JointSamples> {
        if n == 0 {
            return Err(Error::invalid("n_samples must be positive"));
        }
        if targets.is_empty() {
            return Err(Error::invalid("no target units"));
        }
        for t in targets {
            self.check_target(t)?;
        }
        let depth = targets.iter().map(|t| t.layer).max().unwrap_or(1);
        let last_width = targets
            .iter()
            .filter(|t| t.layer == depth)
            .map(|t| t.unit + 1)
            .max()
            .unwrap_or(1);
        let n_chunks = n.div_ceil(self.chunk_size);
        let k = targets.len();

        let chunks: Vec<Result<Vec<f64>>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * self.chunk_size;
                let end = (start + self.chunk_size).min(n);
                let mut out = Vec::with_capacity((end - start) * k);
                let mut kernel = Kernel::new(self.config, self.x, depth, last_width);
                for i in start..end {
                    let mut rng = stream(seed, Domain::UnitSamples, i as u64);
                    match self.propagation {
                        Propagation::Marginal => kernel.marginal(&mut rng, targets, &mut out)?,
                        Propagation::ExplicitWeights => {
                            kernel.explicit(&mut rng, targets, &mut out)?
                        }
                    }
                }
                Ok(out)
            })
            .collect();

        let mut columns = vec![Vec::with_capacity(n); k];
        for chunk in chunks {
            for row in chunk?.chunks_exact(k) {
                for (col, &v) in columns.iter_mut().zip(row) {
                    col.push(v);
                }
            }
        }
        Ok(JointSamples {
            targets: targets.to_vec(),
            columns,
            log_rescale: targets.iter().map(|t| self.log_rescale(t)).collect(),
            config_hash: self.config.hash(),
            input_hash: hash_f64s(self.x),
            seed,
        })
    }

    pub fn units(
        &self,
        layer: usize,
        unit_index: usize,
        kind: UnitKind,
        n_samples: usize,
        seed: u64,
    ) -> Result<UnitSampleSet> {
        let joint = self.joint(&[UnitRef::new(layer, unit_index, kind)], n_samples, seed)?;
        Ok(joint.unit_set(0))
    }
}

/// Per-thread scratch state for drawing one network sample at a time.
struct Kernel<'a> {
    config: &'a NetworkConfig,
    x: &'a [f64],
    depth: usize,
    last_width: usize,
    pre: Vec<f64>,
    post: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(config: &'a NetworkConfig, x: &'a [f64], depth: usize, last_width: usize) -> Self {
        Kernel {
            config,
            x,
            depth,
            last_width,
            pre: Vec::new(),
            post: Vec::new(),
        }
    }

    fn record(&self, layer: usize, targets: &[UnitRef], out: &mut [f64], row: usize) {
        // `out` holds rows of `targets.len()` values; fill this layer's slots.
        for (i, t) in targets.iter().enumerate() {
            if t.layer == layer {
                out[row + i] = match t.kind {
                    UnitKind::Pre => self.pre[t.unit],
                    UnitKind::Post => self.post[t.unit],
                };
            }
        }
    }

    fn marginal<R: Rng>(&mut self, rng: &mut R, targets: &[UnitRef], out: &mut Vec<f64>) -> Result<()> {
        let cfg = self.config;
        let bias = if cfg.include_bias { 1.0 } else { 0.0 };
        let row = out.len();
        out.resize(row + targets.len(), 0.0);
        let mut norm2 = self.x.iter().map(|v| v * v).sum::<f64>() + bias;
        for l in 1..=self.depth {
            let width = if l == self.depth { self.last_width } else { cfg.width(l) };
            let scale = cfg.sigma(l) * norm2.sqrt();
            let factor = cfg.rescale_factor(l);
            self.pre.clear();
            self.post.clear();
            let mut next = bias;
            for _ in 0..width {
                let z: f64 = rng.sample(StandardNormal);
                let g = scale * z;
                let h = factor * cfg.nonlinearity.eval(g);
                next += h * h;
                self.pre.push(g);
                self.post.push(h);
            }
            if !(scale.is_finite() && next.is_finite()) {
                return Err(Error::Overflow { layer: l });
            }
            self.record(l, targets, out, row);
            norm2 = next;
        }
        Ok(())
    }

    fn explicit<R: Rng>(&mut self, rng: &mut R, targets: &[UnitRef], out: &mut Vec<f64>) -> Result<()> {
        let weights = sample_weights_with(self.config, rng, self.depth);
        let pass = forward(&weights, self.x, self.config)?;
        let row = out.len();
        out.resize(row + targets.len(), 0.0);
        for (i, layer) in pass.layers.into_iter().enumerate() {
            self.pre = layer.pre;
            self.post = layer.post;
            self.record(i + 1, targets, out, row);
        }
        Ok(())
    }
}

/// `n_samples` independent prior draws of one unit for the fixed input `x`.
pub fn sample_units(
    config: &NetworkConfig,
    x: &[f64],
    layer: usize,
    unit_index: usize,
    kind: UnitKind,
    n_samples: usize,
    seed: u64,
) -> Result<UnitSampleSet> {
    Sampler::new(config, x)?.units(layer, unit_index, kind, n_samples, seed)
}
