//! Estimation of the sub-Weibull tail parameter.
//!
//! A random variable is sub-Weibull with tail parameter `theta` when
//! `P(|X| >= x) <= a exp(-x^(1/theta))`; the optimal `theta` is the one with
//! `|X|_k ~ k^theta`. Two estimators are provided: the slope of the moment
//! curve `log |X|_k` against `log k`, and the slope of a Weibull plot of the
//! empirical survival function. Both are scale-free.

mod fit;
mod ks;
mod moments;
mod survival;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ks::{kolmogorov_survival, ks_gaussian_test, ks_two_sample, KsResult, MIN_KS_SAMPLES};
pub use moments::{
    empirical_log_norm, estimate_theta_moments, gaussian_norm_oracle, moment_curve, MomentCurve,
    MomentEntry, DEFAULT_K_MAX, DEFAULT_K_MIN, MIN_MOMENT_SAMPLES,
};
pub use survival::{estimate_theta_survival, DEFAULT_TAIL_FRACTION, MIN_TAIL_POINTS};

use crate::error::{Error, Result};
use crate::network::UnitSampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    MomentSlope,
    SurvivalSlope,
}

impl TailMethod {
    /// Allowance for estimator bias added on top of sampling error when
    /// comparing estimates, matching the calibration tolerance on synthetic
    /// Weibull data.
    pub fn tolerance(self) -> f64 {
        0.15
    }
}

impl fmt::Display for TailMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailMethod::MomentSlope => "moment-slope",
            TailMethod::SurvivalSlope => "survival-slope",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitRange {
    Orders { k_min: u32, k_max: u32 },
    TailFraction(f64),
}

impl fmt::Display for FitRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitRange::Orders { k_min, k_max } => write!(f, "k={k_min}..{k_max}"),
            FitRange::TailFraction(q) => write!(f, "tail={q}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub theta_hat: f64,
    pub se_theta: f64,
    pub method: TailMethod,
    pub range: FitRange,
    pub fit_residual: f64,
    pub effective_samples: usize,
}

/// A configured tail estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Estimator {
    MomentSlope { k_min: u32, k_max: u32 },
    SurvivalSlope { tail_fraction: f64 },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::MomentSlope {
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
        }
    }
}

impl Estimator {
    pub fn survival() -> Self {
        Estimator::SurvivalSlope {
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }

    pub fn estimate(&self, samples: &UnitSampleSet) -> Result<TailEstimate> {
        match *self {
            Estimator::MomentSlope { k_min, k_max } => {
                estimate_theta_moments(&moment_curve(samples, k_min, k_max)?)
            }
            Estimator::SurvivalSlope { tail_fraction } => {
                estimate_theta_survival(samples, tail_fraction)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionVerdict {
    pub theta_prev: f64,
    pub theta_next: f64,
    /// `theta_next - theta_prev`
    pub increment: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Adding a layer adds `1/2` to the tail parameter. Passes when
/// `|increment - 1/2| <= 2 (se_prev + se_next) + method tolerance`.
pub fn recursion_check(prev: &TailEstimate, next: &TailEstimate) -> Result<RecursionVerdict> {
    if prev.method != next.method {
        return Err(Error::invalid(format!(
            "cannot compare a {} estimate with a {} estimate",
            prev.method, next.method
        )));
    }
    let increment = next.theta_hat - prev.theta_hat;
    let tolerance = 2.0 * (prev.se_theta + next.se_theta) + prev.method.tolerance();
    Ok(RecursionVerdict {
        theta_prev: prev.theta_hat,
        theta_next: next.theta_hat,
        increment,
        tolerance,
        pass: (increment - 0.5).abs() <= tolerance,
    })
}
