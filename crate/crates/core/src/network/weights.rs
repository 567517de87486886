use rand::Rng;
use rand_distr::StandardNormal;

use super::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::rng::{stream, Domain};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// One draw of every weight in the network. Layer `l` has shape
/// `width(l) x fan_in(l)`; with bias, the last column multiplies the
/// constant input 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    layers: Vec<Matrix>,
}

impl WeightSet {
    /// Wraps explicit matrices after checking them against `config`.
    pub fn from_matrices(config: &NetworkConfig, layers: Vec<Matrix>) -> Result<Self> {
        config.validate()?;
        if layers.len() != config.depth() {
            return Err(Error::invalid(format!(
                "{} weight matrices for {} layers",
                layers.len(),
                config.depth()
            )));
        }
        for (i, m) in layers.iter().enumerate() {
            let l = i + 1;
            if m.rows != config.width(l) || m.cols != config.fan_in(l) {
                return Err(Error::invalid(format!(
                    "layer {l} weights are {}x{}, expected {}x{}",
                    m.rows,
                    m.cols,
                    config.width(l),
                    config.fan_in(l)
                )));
            }
        }
        Ok(WeightSet { layers })
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    /// Weight matrix of `layer` (1-based).
    pub fn layer(&self, layer: usize) -> &Matrix {
        &self.layers[layer - 1]
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|m| m.data.iter().copied())
    }
}

/// `dim` i.i.d. standard normal features, fixed by `seed`.
pub fn sample_input(dim: usize, seed: u64) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::invalid("input dimension must be positive"));
    }
    let mut rng = stream(seed, Domain::Input, 0);
    Ok((0..dim).map(|_| rng.sample(StandardNormal)).collect())
}

/// Draws a full `WeightSet` from the prior.
pub fn sample_weights(config: &NetworkConfig, seed: u64) -> Result<WeightSet> {
    config.validate()?;
    let mut rng = stream(seed, Domain::Weights, 0);
    Ok(sample_weights_with(config, &mut rng, config.depth()))
}

/// Draws layers `1..=depth` from `rng`. The config must already be valid.
pub(crate) fn sample_weights_with<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
    depth: usize,
) -> WeightSet {
    let layers = (1..=depth)
        .map(|l| {
            let (rows, cols, sigma) = (config.width(l), config.fan_in(l), config.sigma(l));
            let data = (0..rows * cols)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Matrix { rows, cols, data }
        })
        .collect();
    WeightSet { layers }
}

/// Pre- and post-nonlinearity values of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub layers: Vec<LayerActivations>,
    /// Output factor applied after each layer (all 1 without rescaling).
    pub rescale: Vec<f64>,
}

/// Propagates `x` through every layer held by `weights`.
///
/// `g(l) = W(l) h(l-1)` with `h(0) = x`, plus a trailing 1 when the config
/// includes biases, and `h(l) = phi(g(l))`, times the layer's rescale factor.
pub fn forward(weights: &WeightSet, x: &[f64], config: &NetworkConfig) -> Result<ForwardPass> {
    if x.len() != config.input_dim {
        return Err(Error::invalid(format!(
            "input has length {}, config expects {}",
            x.len(),
            config.input_dim
        )));
    }
    if weights.layers.len() > config.depth() {
        return Err(Error::invalid("weight set is deeper than the config"));
    }
    let mut input: Vec<f64> = x.to_vec();
    let mut layers = Vec::with_capacity(weights.layers.len());
    let mut rescale = Vec::with_capacity(weights.layers.len());
    for (i, w) in weights.layers.iter().enumerate() {
        let l = i + 1;
        if config.include_bias {
            input.push(1.0);
        }
        if w.cols != input.len() || w.rows != config.width(l) {
            return Err(Error::invalid(format!("layer {l} weight shape mismatch")));
        }
        let pre: Vec<f64> = (0..w.rows)
            .map(|r| w.row(r).iter().zip(&input).map(|(a, b)| a * b).sum())
            .collect();
        let factor = config.rescale_factor(l);
        let post: Vec<f64> = pre.iter().map(|&g| factor * config.nonlinearity.eval(g)).collect();
        if pre.iter().chain(&post).any(|v| !v.is_finite()) {
            return Err(Error::Overflow { layer: l });
        }
        input = post.clone();
        layers.push(LayerActivations { pre, post });
        rescale.push(factor);
    }
    Ok(ForwardPass { layers, rescale })
}
