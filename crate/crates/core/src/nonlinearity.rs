//! Activation functions and numerical certification of the extended
//! envelope property.
//!
//! A nonlinearity obeys the envelope property when, for some `c1, c2 >= 0`
//! and `d1, d2 > 0`,
//!
//! ```text
//! |phi(u)| >= c1 + d1 |u|   on one half-line (u >= 0 or u <= 0)
//! |phi(u)| <= c2 + d2 |u|   everywhere
//! ```
//!
//! Certification here is numerical: both inequalities are checked on a
//! dense grid, never proven.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum NonlinearitySpec {
    Relu,
    Prelu { alpha: f64 },
    Elu { alpha: f64 },
    Selu { lambda: f64, alpha: f64 },
    Tanh,
    Sigmoid,
    Identity,
}

impl NonlinearitySpec {
    /// Standard SELU constants.
    pub const SELU: NonlinearitySpec = NonlinearitySpec::Selu {
        lambda: 1.0507,
        alpha: 1.6733,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NonlinearitySpec::Prelu { alpha } => alpha.is_finite() && alpha >= 0.0,
            NonlinearitySpec::Elu { alpha } => alpha.is_finite() && alpha > 0.0,
            NonlinearitySpec::Selu { lambda, alpha } => {
                lambda.is_finite() && alpha.is_finite() && lambda > 0.0 && alpha > 0.0
            }
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad nonlinearity parameters: {self}")))
        }
    }

    /// Evaluates without checking the argument. Used on hot paths where the
    /// caller already guarantees finiteness.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            NonlinearitySpec::Relu => {
                if u > 0.0 {
                    u
                } else {
                    0.0
                }
            }
            NonlinearitySpec::Prelu { alpha } => {
                if u > 0.0 {
                    u
                } else {
                    alpha * u
                }
            }
            NonlinearitySpec::Elu { alpha } => {
                if u > 0.0 {
                    u
                } else {
                    alpha * u.exp_m1()
                }
            }
            NonlinearitySpec::Selu { lambda, alpha } => {
                if u > 0.0 {
                    lambda * u
                } else {
                    lambda * alpha * u.exp_m1()
                }
            }
            NonlinearitySpec::Tanh => u.tanh(),
            NonlinearitySpec::Sigmoid => {
                if u >= 0.0 {
                    1.0 / (1.0 + (-u).exp())
                } else {
                    let e = u.exp();
                    e / (1.0 + e)
                }
            }
            NonlinearitySpec::Identity => u,
        }
    }

    /// `phi(u)`; rejects non-finite input.
    pub fn apply(&self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::invalid(format!("non-finite activation input {u}")));
        }
        Ok(self.eval(u))
    }

    /// True when `phi(c u) = c phi(u)` for every `c > 0`.
    pub fn is_positively_homogeneous(&self) -> bool {
        matches!(
            self,
            NonlinearitySpec::Relu | NonlinearitySpec::Prelu { .. } | NonlinearitySpec::Identity
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            NonlinearitySpec::Relu => "relu",
            NonlinearitySpec::Prelu { .. } => "prelu",
            NonlinearitySpec::Elu { .. } => "elu",
            NonlinearitySpec::Selu { .. } => "selu",
            NonlinearitySpec::Tanh => "tanh",
            NonlinearitySpec::Sigmoid => "sigmoid",
            NonlinearitySpec::Identity => "identity",
        }
    }
}

impl fmt::Display for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NonlinearitySpec::Prelu { alpha } | NonlinearitySpec::Elu { alpha } => {
                write!(f, "{}:{alpha}", self.name())
            }
            NonlinearitySpec::Selu { lambda, alpha } => write!(f, "selu:{lambda},{alpha}"),
            _ => f.write_str(self.name()),
        }
    }
}

/// Parses `relu`, `prelu:0.1`, `elu:1`, `selu` or `selu:1.0507,1.6733`.
impl FromStr for NonlinearitySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let params: Vec<f64> = match args {
            Some(a) => a
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad parameter {p:?} in {s:?}")))
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} takes {n} parameter(s), got {}", params.len())))
            }
        };
        let spec = match name.to_ascii_lowercase().as_str() {
            "relu" => {
                want(0)?;
                NonlinearitySpec::Relu
            }
            "prelu" => {
                want(1)?;
                NonlinearitySpec::Prelu { alpha: params[0] }
            }
            "elu" => {
                if params.is_empty() {
                    NonlinearitySpec::Elu { alpha: 1.0 }
                } else {
                    want(1)?;
                    NonlinearitySpec::Elu { alpha: params[0] }
                }
            }
            "selu" => {
                if params.is_empty() {
                    NonlinearitySpec::SELU
                } else {
                    want(2)?;
                    NonlinearitySpec::Selu {
                        lambda: params[0],
                        alpha: params[1],
                    }
                }
            }
            "tanh" => {
                want(0)?;
                NonlinearitySpec::Tanh
            }
            "sigmoid" => {
                want(0)?;
                NonlinearitySpec::Sigmoid
            }
            "identity" | "linear" => {
                want(0)?;
                NonlinearitySpec::Identity
            }
            other => return Err(Error::invalid(format!("unknown nonlinearity {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Half-line on which the lower envelope is claimed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    PositiveAxis,
    NegativeAxis,
}

impl Side {
    pub fn contains(self, u: f64) -> bool {
        match self {
            Side::PositiveAxis => u >= 0.0,
            Side::NegativeAxis => u <= 0.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::PositiveAxis => "positive-axis",
            Side::NegativeAxis => "negative-axis",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub c1: f64,
    pub d1: f64,
    pub side: Side,
    pub c2: f64,
    pub d2: f64,
}

/// Symmetric test grid: zero plus `points_per_sign` log-spaced magnitudes in
/// `[min_abs, max_abs]` on each sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeGrid {
    pub min_abs: f64,
    pub max_abs: f64,
    pub points_per_sign: usize,
}

impl Default for EnvelopeGrid {
    fn default() -> Self {
        EnvelopeGrid {
            min_abs: 1e-3,
            max_abs: 1e3,
            points_per_sign: 100_000,
        }
    }
}

impl EnvelopeGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_abs > 0.0 && self.max_abs >= 100.0 && self.min_abs < self.max_abs) {
            return Err(Error::invalid("envelope grid must cover at least [-100, 100]"));
        }
        if 2 * self.points_per_sign + 1 < 10_000 {
            return Err(Error::invalid("envelope grid needs at least 10^4 points"));
        }
        Ok(())
    }

    /// Magnitudes in increasing order, starting with 0.
    fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points_per_sign;
        let lo = self.min_abs.ln();
        let step = (self.max_abs.ln() - lo) / (n.saturating_sub(1).max(1)) as f64;
        std::iter::once(0.0).chain((0..n).map(move |i| {
            if i + 1 == n {
                self.max_abs
            } else {
                (lo + step * i as f64).exp()
            }
        }))
    }

    /// All grid points, negative then positive, each in increasing order of
    /// magnitude.
    pub fn points(&self) -> Vec<f64> {
        let mags: Vec<f64> = self.magnitudes().collect();
        let mut pts = Vec::with_capacity(2 * mags.len() - 1);
        pts.extend(mags.iter().skip(1).map(|m| -m));
        pts.extend(mags.iter().copied());
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inequality {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum EnvelopeVerdict {
    Holds,
    Fails { point: f64, inequality: Inequality },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeWitness {
    pub spec: NonlinearitySpec,
    pub constants: EnvelopeConstants,
    pub grid: EnvelopeGrid,
    pub verdict: EnvelopeVerdict,
}

impl EnvelopeWitness {
    pub fn holds(&self) -> bool {
        self.verdict == EnvelopeVerdict::Holds
    }
}

// Absolute slack for the grid comparisons; the inequalities are linear so
// rounding in `d * |u|` is the only source of spurious failures.
fn slack(u: f64) -> f64 {
    1e-12 * (1.0 + u.abs())
}

/// Checks both envelope inequalities on `grid`, reporting the first violation.
pub fn verify_envelope(
    spec: &NonlinearitySpec,
    constants: EnvelopeConstants,
    grid: &EnvelopeGrid,
) -> Result<EnvelopeWitness> {
    spec.validate()?;
    grid.validate()?;
    let EnvelopeConstants { c1, d1, side, c2, d2 } = constants;
    if !(c1 >= 0.0 && c2 >= 0.0 && d1 > 0.0 && d2 > 0.0) {
        return Err(Error::invalid("envelope constants need c >= 0 and d > 0"));
    }
    let mut verdict = EnvelopeVerdict::Holds;
    for u in grid.points() {
        let v = spec.eval(u).abs();
        if side.contains(u) && v < c1 + d1 * u.abs() - slack(u) {
            verdict = EnvelopeVerdict::Fails {
                point: u,
                inequality: Inequality::Lower,
            };
            break;
        }
        if v > c2 + d2 * u.abs() + slack(u) {
            verdict = EnvelopeVerdict::Fails {
                point: u,
                inequality: Inequality::Upper,
            };
            break;
        }
    }
    Ok(EnvelopeWitness {
        spec: *spec,
        constants,
        grid: *grid,
        verdict,
    })
}

/// Far-field slope below which a function is treated as bounded.
pub const BOUNDED_SLOPE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum EnvelopeSearch {
    Certified(EnvelopeWitness),
    /// No linear growth on the grid; `sup_abs` is `max |phi|` over the grid.
    /// Bounded activations give sub-Gaussian units instead.
    Bounded { spec: NonlinearitySpec, sup_abs: f64 },
}

impl EnvelopeSearch {
    pub fn is_certified(&self) -> bool {
        matches!(self, EnvelopeSearch::Certified(w) if w.holds())
    }
}

/// Fits the tightest linear envelopes on the grid and verifies them.
///
/// A function counts as bounded when `sup |phi|` grows by less than
/// `BOUNDED_SLOPE * max_abs` across the outermost decade of the grid.
/// Otherwise the lower envelope is taken through the origin (`c1 = 0`) with
/// `d1 = min |phi(u)| / |u|` on the better half-line, and the upper envelope
/// uses the far-field slope `d2` with the smallest `c2` that covers the grid.
pub fn search_envelope_constants(
    spec: &NonlinearitySpec,
    grid: &EnvelopeGrid,
) -> Result<EnvelopeSearch> {
    spec.validate()?;
    grid.validate()?;
    let pts = grid.points();
    let far = grid.max_abs / 10.0;

    let mut sup_inner = 0.0f64;
    let mut sup_all = 0.0f64;
    for &u in &pts {
        let v = spec.eval(u).abs();
        sup_all = sup_all.max(v);
        if u.abs() <= far {
            sup_inner = sup_inner.max(v);
        }
    }
    if sup_all - sup_inner < BOUNDED_SLOPE * grid.max_abs {
        return Ok(EnvelopeSearch::Bounded {
            spec: *spec,
            sup_abs: sup_all,
        });
    }

    let lower_slope = |side: Side| {
        pts.iter()
            .filter(|&&u| u != 0.0 && side.contains(u))
            .map(|&u| spec.eval(u).abs() / u.abs())
            .fold(f64::INFINITY, f64::min)
    };
    let (pos, neg) = (lower_slope(Side::PositiveAxis), lower_slope(Side::NegativeAxis));
    let (side, d1) = if pos >= neg {
        (Side::PositiveAxis, pos)
    } else {
        (Side::NegativeAxis, neg)
    };

    let d2 = (spec.eval(grid.max_abs).abs().max(spec.eval(-grid.max_abs).abs())) / grid.max_abs;
    let c2 = pts
        .iter()
        .map(|&u| spec.eval(u).abs() - d2 * u.abs())
        .fold(0.0f64, f64::max);

    if !(d1 > 0.0) {
        // Grows somewhere but has no linear lower bound on either side.
        return Ok(EnvelopeSearch::Certified(EnvelopeWitness {
            spec: *spec,
            constants: EnvelopeConstants {
                c1: 0.0,
                d1: f64::MIN_POSITIVE,
                side,
                c2,
                d2,
            },
            grid: *grid,
            verdict: EnvelopeVerdict::Fails {
                point: 0.0,
                inequality: Inequality::Lower,
            },
        }));
    }
    let constants = EnvelopeConstants {
        c1: 0.0,
        d1,
        side,
        c2,
        d2,
    };
    verify_envelope(spec, constants, grid).map(EnvelopeSearch::Certified)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relu_constants() -> EnvelopeConstants {
        EnvelopeConstants {
            c1: 0.0,
            d1: 1.0,
            side: Side::PositiveAxis,
            c2: 0.0,
            d2: 1.0,
        }
    }

    #[test]
    fn apply_basic_values() {
        let relu = NonlinearitySpec::Relu;
        assert_eq!(relu.apply(-2.0).unwrap(), 0.0);
        assert_eq!(relu.apply(3.0).unwrap(), 3.0);
        assert_eq!(NonlinearitySpec::Tanh.apply(0.0).unwrap(), 0.0);
        assert_eq!(NonlinearitySpec::Sigmoid.apply(0.0).unwrap(), 0.5);
        assert_eq!(NonlinearitySpec::Elu { alpha: 1.0 }.apply(0.0).unwrap(), 0.0);
        assert!(relu.apply(f64::NAN).is_err());
        assert!(relu.apply(f64::INFINITY).is_err());
    }

    #[test]
    fn parity_spot_checks() {
        for u in [0.3, 1.7, 12.0] {
            let id = NonlinearitySpec::Identity;
            assert_eq!(id.eval(-u), -id.eval(u));
            let t = NonlinearitySpec::Tanh;
            assert_eq!(t.eval(-u), -t.eval(u));
            let s = NonlinearitySpec::Sigmoid;
            assert!((s.eval(-u) + s.eval(u) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(NonlinearitySpec::Prelu { alpha: -0.1 }.validate().is_err());
        assert!(NonlinearitySpec::Elu { alpha: 0.0 }.validate().is_err());
        assert!(NonlinearitySpec::Selu { lambda: 1.0, alpha: f64::NAN }.validate().is_err());
        assert!(NonlinearitySpec::Prelu { alpha: 0.0 }.validate().is_ok());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["relu", "prelu:0.1", "elu:1", "selu:1.0507,1.6733", "tanh", "sigmoid", "identity"] {
            let spec: NonlinearitySpec = s.parse().unwrap();
            let again: NonlinearitySpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again);
        }
        assert!("prelu".parse::<NonlinearitySpec>().is_err());
        assert!("swish".parse::<NonlinearitySpec>().is_err());
    }

    #[test]
    fn relu_envelope_holds() {
        let w = verify_envelope(&NonlinearitySpec::Relu, relu_constants(), &EnvelopeGrid::default())
            .unwrap();
        assert!(w.holds());
    }

    #[test]
    fn prelu_envelope_holds() {
        let w = verify_envelope(
            &NonlinearitySpec::Prelu { alpha: 0.1 },
            relu_constants(),
            &EnvelopeGrid::default(),
        )
        .unwrap();
        assert!(w.holds());
    }

    #[test]
    fn tanh_lower_envelope_fails_far_out() {
        for side in [Side::PositiveAxis, Side::NegativeAxis] {
            let c = EnvelopeConstants {
                c1: 0.0,
                d1: 0.01,
                side,
                c2: 1.0,
                d2: 1.0,
            };
            let w = verify_envelope(&NonlinearitySpec::Tanh, c, &EnvelopeGrid::default()).unwrap();
            match w.verdict {
                EnvelopeVerdict::Fails { point, inequality } => {
                    assert_eq!(inequality, Inequality::Lower);
                    assert!(point.abs() > 10.0);
                }
                EnvelopeVerdict::Holds => panic!("tanh cannot have a linear lower envelope"),
            }
        }
    }

    #[test]
    fn upper_violation_is_reported() {
        let c = EnvelopeConstants {
            c1: 0.0,
            d1: 0.5,
            side: Side::PositiveAxis,
            c2: 0.0,
            d2: 0.9,
        };
        let w = verify_envelope(&NonlinearitySpec::Relu, c, &EnvelopeGrid::default()).unwrap();
        assert!(matches!(
            w.verdict,
            EnvelopeVerdict::Fails {
                inequality: Inequality::Upper,
                ..
            }
        ));
    }

    #[test]
    fn small_grids_rejected() {
        let g = EnvelopeGrid {
            min_abs: 1e-3,
            max_abs: 50.0,
            points_per_sign: 100_000,
        };
        assert!(verify_envelope(&NonlinearitySpec::Relu, relu_constants(), &g).is_err());
        let g = EnvelopeGrid {
            points_per_sign: 100,
            ..EnvelopeGrid::default()
        };
        assert!(verify_envelope(&NonlinearitySpec::Relu, relu_constants(), &g).is_err());
    }

    #[test]
    fn search_relu() {
        match search_envelope_constants(&NonlinearitySpec::Relu, &EnvelopeGrid::default()).unwrap() {
            EnvelopeSearch::Certified(w) => {
                assert!(w.holds());
                assert_eq!(w.constants, relu_constants());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn search_bounded_families() {
        for spec in [NonlinearitySpec::Sigmoid, NonlinearitySpec::Tanh] {
            let out = search_envelope_constants(&spec, &EnvelopeGrid::default()).unwrap();
            assert!(matches!(out, EnvelopeSearch::Bounded { .. }), "{spec}: {out:?}");
        }
    }

    #[test]
    fn search_selu_slope_is_lambda() {
        let out = search_envelope_constants(&NonlinearitySpec::SELU, &EnvelopeGrid::default()).unwrap();
        match out {
            EnvelopeSearch::Certified(w) => {
                assert!(w.holds());
                assert_eq!(w.constants.side, Side::PositiveAxis);
                assert!((w.constants.d1 - 1.0507).abs() < 1e-9);
                assert!((w.constants.d2 - 1.0507).abs() < 1e-9);
                // negative saturation level lambda * alpha bounds the upper intercept
                assert!(w.constants.c2 <= 1.0507 * 1.6733 + 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn search_elu_and_prelu_hold() {
        for spec in [NonlinearitySpec::Elu { alpha: 1.0 }, NonlinearitySpec::Prelu { alpha: 0.1 }] {
            let out = search_envelope_constants(&spec, &EnvelopeGrid::default()).unwrap();
            assert!(out.is_certified(), "{spec}: {out:?}");
        }
    }
}
