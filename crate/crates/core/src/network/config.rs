use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::digest::short_hash;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// Prior standard deviation of the weights, shared or per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightStd {
    Global(f64),
    PerLayer(Vec<f64>),
}

impl Default for WeightStd {
    fn default() -> Self {
        WeightStd::Global(1.0)
    }
}

/// A fully-connected network with i.i.d. `N(0, sigma^2)` weights.
///
/// Config files are TOML:
///
/// ```toml
/// input_dim = 100
/// layer_widths = [100, 100, 100]
/// nonlinearity = "relu"        # or { family = "prelu", alpha = 0.1 }
/// weight_std = 1.0             # or one entry per layer
/// include_bias = false
/// rescale = false
/// seed = 42
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    #[serde(deserialize_with = "flexible_nonlinearity")]
    pub nonlinearity: NonlinearitySpec,
    #[serde(default)]
    pub weight_std: WeightStd,
    /// Appends a constant input 1 to every layer; its weight column is drawn
    /// from the same prior.
    #[serde(default)]
    pub include_bias: bool,
    /// Multiplies each layer's output by `1 / (sigma * sqrt(fan_in))` to keep
    /// deep networks inside double precision. Only allowed for positively
    /// homogeneous nonlinearities, where it is a pure change of scale that
    /// samplers undo in the log domain.
    #[serde(default)]
    pub rescale: bool,
    #[serde(default)]
    pub seed: u64,
}

fn flexible_nonlinearity<'de, D: Deserializer<'de>>(d: D) -> Result<NonlinearitySpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Name(String),
        Table(NonlinearitySpec),
    }
    match Repr::deserialize(d)? {
        Repr::Name(s) => s.parse().map_err(serde::de::Error::custom),
        Repr::Table(spec) => Ok(spec),
    }
}

impl NetworkConfig {
    pub fn mlp(input_dim: usize, layer_widths: Vec<usize>, nonlinearity: NonlinearitySpec) -> Self {
        NetworkConfig {
            input_dim,
            layer_widths,
            nonlinearity,
            weight_std: WeightStd::default(),
            include_bias: false,
            rescale: false,
            seed: 0,
        }
    }

    /// Widths `first, first - step, first - 2 step, ...` over `depth` layers.
    pub fn tapered(
        input_dim: usize,
        first: usize,
        step: usize,
        depth: usize,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        if first <= step * depth.saturating_sub(1) {
            return Err(Error::invalid("tapered widths would reach zero"));
        }
        let widths = (0..depth).map(|l| first - step * l).collect();
        Ok(Self::mlp(input_dim, widths, nonlinearity))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_weight_std(mut self, std: WeightStd) -> Self {
        self.weight_std = std;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if self.layer_widths.is_empty() {
            return Err(Error::invalid("layer_widths must be non-empty"));
        }
        if let Some(l) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::invalid(format!("layer {} has width 0", l + 1)));
        }
        self.nonlinearity.validate()?;
        let stds: &[f64] = match &self.weight_std {
            WeightStd::Global(s) => std::slice::from_ref(s),
            WeightStd::PerLayer(v) => {
                if v.len() != self.layer_widths.len() {
                    return Err(Error::invalid(format!(
                        "weight_std has {} entries for {} layers",
                        v.len(),
                        self.layer_widths.len()
                    )));
                }
                v
            }
        };
        if let Some(s) = stds.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::invalid(format!("weight_std must be positive and finite, got {s}")));
        }
        if self.rescale && !self.nonlinearity.is_positively_homogeneous() {
            return Err(Error::invalid(format!(
                "rescale requires a positively homogeneous nonlinearity, not {}",
                self.nonlinearity
            )));
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.layer_widths.len()
    }

    /// Width of layer `layer` (1-based).
    pub fn width(&self, layer: usize) -> usize {
        self.layer_widths[layer - 1]
    }

    /// Prior std of layer `layer` (1-based).
    pub fn sigma(&self, layer: usize) -> f64 {
        match &self.weight_std {
            WeightStd::Global(s) => *s,
            WeightStd::PerLayer(v) => v[layer - 1],
        }
    }

    /// Number of inputs to each unit of `layer`, bias column included.
    pub fn fan_in(&self, layer: usize) -> usize {
        let prev = if layer == 1 {
            self.input_dim
        } else {
            self.layer_widths[layer - 2]
        };
        prev + usize::from(self.include_bias)
    }

    /// Factor applied to the output of `layer`; 1 when rescaling is off.
    pub fn rescale_factor(&self, layer: usize) -> f64 {
        if self.rescale {
            1.0 / (self.sigma(layer) * (self.fan_in(layer) as f64).sqrt())
        } else {
            1.0
        }
    }

    /// Short content hash of the canonical serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        short_hash(&json)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: NetworkConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to toml")
    }
}
