//! Penalties induced by the Gaussian weight prior.
//!
//! On the weights the prior gives plain weight decay, `sum W^2`. On the
//! units, a layer-`l` unit has density roughly proportional to
//! `exp(-|u|^(2/l))`, so the marginal part of the unit penalty is
//! `sum_l sum_m |U_m(l)|^(2/l)`: ridge at layer 1, lasso at layer 2 and
//! increasingly sparsity-inducing quasi-norms deeper. The dependence term of
//! the joint prior is not computed. Scale constants are set to 1.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::WeightSet;

/// `sum_i |v_i|^q`, the `q`-th power of the `L^q` quasi-norm.
pub fn lq_penalty(v: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("exponent q must be positive, got {q}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("penalty input has non-finite entries"));
    }
    Ok(v.iter().map(|x| x.abs().powf(q)).sum())
}

/// Sum of squares of every weight.
pub fn weight_decay(weights: &WeightSet) -> f64 {
    weights.entries().map(|w| w * w).sum()
}

/// Exponent of the layer-`layer` unit penalty, `2 / layer`.
pub fn layer_exponent(layer: usize) -> f64 {
    2.0 / layer as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPenalty {
    pub layer: usize,
    pub q: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    pub layers: Vec<LayerPenalty>,
    /// Sum of the layer penalties.
    pub total_unit_penalty: f64,
    pub weight_penalty: Option<f64>,
    /// Always false: the copula term is outside this computation.
    pub copula_term_included: bool,
}

impl PenaltyBreakdown {
    pub fn with_weights(mut self, weights: &WeightSet) -> Self {
        self.weight_penalty = Some(weight_decay(weights));
        self
    }

    /// Plain-text `key = value` report.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        for l in &self.layers {
            let _ = writeln!(s, "layer {} q = {} penalty = {}", l.layer, l.q, l.value);
        }
        let _ = writeln!(s, "total_unit_penalty = {}", self.total_unit_penalty);
        match self.weight_penalty {
            Some(w) => {
                let _ = writeln!(s, "weight_penalty = {w}");
            }
            None => s.push_str("weight_penalty = not computed\n"),
        }
        s.push_str("copula_term = excluded\n");
        s
    }
}

/// Layer `l` (1-based position in `units`) contributes `lq_penalty(U(l), 2/l)`.
pub fn unit_penalty(units: &[Vec<f64>]) -> Result<PenaltyBreakdown> {
    if units.is_empty() {
        return Err(Error::invalid("need at least one layer of units"));
    }
    let layers = units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let q = layer_exponent(i + 1);
            Ok(LayerPenalty {
                layer: i + 1,
                q,
                value: lq_penalty(u, q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PenaltyBreakdown {
        total_unit_penalty: layers.iter().map(|l| l.value).sum(),
        layers,
        weight_penalty: None,
        copula_term_included: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub phi: f64,
    pub x: f64,
    pub y: f64,
}

/// Points on `{(x, y) : (|x|^q + |y|^q)^(1/q) = t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub q: f64,
    pub t: f64,
    pub points: Vec<ContourPoint>,
}

impl ContourSet {
    /// Largest relative deviation of any point from the ball equation.
    pub fn max_relative_error(&self) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let r = (p.x.abs().powf(self.q) + p.y.abs().powf(self.q)).powf(1.0 / self.q);
                (r - self.t).abs() / self.t
            })
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# q={} t={}", self.q, self.t)?;
        writeln!(w, "phi,x,y")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.phi, p.x, p.y)?;
        }
        Ok(())
    }
}

fn signed_pow(c: f64, e: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c.signum() * c.abs().powf(e)
    }
}

/// Superellipse parametrization with `n_points` equally spaced angles in
/// `[0, 2 pi)`: `x = t sgn(cos a) |cos a|^(2/q)`, `y = t sgn(sin a) |sin a|^(2/q)`.
pub fn contour(q: f64, t: f64, n_points: usize) -> Result<ContourSet> {
    if !(q > 0.0 && q.is_finite() && t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("contour needs q > 0 and t > 0"));
    }
    if n_points < 4 {
        return Err(Error::invalid("contour needs at least 4 points"));
    }
    let e = 2.0 / q;
    let points = (0..n_points)
        .map(|i| {
            // Exact axis angles avoid cos(pi/2) = 6e-17 style residue.
            let (phi, c, s) = match (4 * i) % n_points {
                0 => {
                    let quarter = 4 * i / n_points;
                    let (c, s) = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][quarter];
                    (TAU * i as f64 / n_points as f64, c, s)
                }
                _ => {
                    let phi = TAU * i as f64 / n_points as f64;
                    (phi, phi.cos(), phi.sin())
                }
            };
            ContourPoint {
                phi,
                x: t * signed_pow(c, e),
                y: t * signed_pow(s, e),
            }
        })
        .collect();
    Ok(ContourSet { q, t, points })
}

/// Coordinate of the `x = y > 0` point of the ball of radius `t`:
/// `t 2^(-1/q)`.
pub fn equal_coordinate_point(q: f64, t: f64) -> f64 {
    t * 2f64.powf(-1.0 / q)
}
