//! Empirical `k`-th norms `|X|_k = (E |X|^k)^(1/k)` in the log domain and the
//! moment-growth estimate of the tail parameter.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::fit::fit_line;
use super::{FitRange, TailEstimate, TailMethod};
use crate::error::{Error, Result};
use crate::network::UnitSampleSet;

pub const MIN_MOMENT_SAMPLES: usize = 100;
pub const DEFAULT_K_MIN: u32 = 2;
pub const DEFAULT_K_MAX: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub k: u32,
    /// `log |X|_k`
    pub log_norm: f64,
    /// Standard error of `log_norm`.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    entries: Vec<MomentEntry>,
    pub n_samples: usize,
    pub source: String,
}

impl MomentCurve {
    pub fn new(entries: Vec<MomentEntry>, n_samples: usize, source: impl Into<String>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].k >= w[1].k) {
            return Err(Error::invalid("moment curve orders must be strictly increasing"));
        }
        if entries.iter().any(|e| e.k == 0 || !e.log_norm.is_finite() || !(e.se >= 0.0)) {
            return Err(Error::invalid("moment curve entries need k >= 1, finite norms, se >= 0"));
        }
        Ok(MomentCurve {
            entries,
            n_samples,
            source: source.into(),
        })
    }

    pub fn entries(&self) -> &[MomentEntry] {
        &self.entries
    }

    /// Consecutive orders where `log |X|_k` drops by more than twice the
    /// combined standard error. Norms are non-decreasing in `k`, so a
    /// non-empty result points at an estimation problem.
    pub fn lyapunov_violations(&self) -> Vec<(u32, u32)> {
        self.entries
            .windows(2)
            .filter(|w| w[1].log_norm < w[0].log_norm - 2.0 * (w[0].se + w[1].se))
            .map(|w| (w[0].k, w[1].k))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# source={} n_samples={}", self.source, self.n_samples)?;
        writeln!(w, "k,log_norm,se")?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.k, e.log_norm, e.se)?;
        }
        Ok(())
    }
}

/// `log(mean(exp(k * l_i)))` over log-magnitudes `l_i`; `-inf` entries are
/// zeros and contribute nothing.
fn log_mean_power(logs: &[f64], k: f64) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = logs.iter().map(|&l| (k * (l - max)).exp()).sum();
    k * max + sum.ln() - (logs.len() as f64).ln()
}

fn log_norm_from_logs(logs: &[f64], k: u32) -> Result<(f64, f64)> {
    let kf = f64::from(k);
    let lk = log_mean_power(logs, kf);
    if lk == f64::NEG_INFINITY {
        return Err(Error::Degenerate("all samples are zero".into()));
    }
    let l2k = log_mean_power(logs, 2.0 * kf);
    // Delta method: Var(log m_k) ~ (m_2k / m_k^2 - 1) / n.
    let ratio = (l2k - 2.0 * lk).exp_m1().max(0.0);
    let se = (ratio / logs.len() as f64).sqrt() / kf;
    Ok((lk / kf, se))
}

fn check_samples(samples: &UnitSampleSet) -> Result<Vec<f64>> {
    if samples.n_samples() < MIN_MOMENT_SAMPLES {
        return Err(Error::invalid(format!(
            "moment estimation needs at least {MIN_MOMENT_SAMPLES} samples, got {}",
            samples.n_samples()
        )));
    }
    let logs: Vec<f64> = samples.log_abs().collect();
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    Ok(logs)
}

/// `(log |X|_k, se)` computed entirely from log-magnitudes.
pub fn empirical_log_norm(samples: &UnitSampleSet, k: u32) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::invalid("moment order must be >= 1"));
    }
    log_norm_from_logs(&check_samples(samples)?, k)
}

/// Exact `|X|_k` for `X ~ N(0, sigma^2)`:
/// `E|X|^k = sigma^k 2^(k/2) Gamma((k+1)/2) / sqrt(pi)`.
pub fn gaussian_norm_oracle(sigma: f64, k: u32) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) || k == 0 {
        return Err(Error::invalid("need sigma > 0 and k >= 1"));
    }
    let kf = f64::from(k);
    let log_moment = kf * sigma.ln() + 0.5 * kf * std::f64::consts::LN_2 + ln_gamma((kf + 1.0) / 2.0)
        - 0.5 * std::f64::consts::PI.ln();
    Ok((log_moment / kf).exp())
}

pub fn moment_curve(samples: &UnitSampleSet, k_min: u32, k_max: u32) -> Result<MomentCurve> {
    if k_min == 0 || k_min >= k_max {
        return Err(Error::invalid(format!("need 1 <= k_min < k_max, got [{k_min}, {k_max}]")));
    }
    let logs = check_samples(samples)?;
    let entries = (k_min..=k_max)
        .map(|k| {
            let (log_norm, se) = log_norm_from_logs(&logs, k)?;
            if !se.is_finite() {
                return Err(Error::MomentOverflow(format!("order {} moment", 2 * k)));
            }
            Ok(MomentEntry { k, log_norm, se })
        })
        .collect::<Result<Vec<_>>>()?;
    let source = format!(
        "layer={} kind={} unit={} config={}",
        samples.layer, samples.kind, samples.unit_index, samples.provenance.config_hash
    );
    MomentCurve::new(entries, samples.n_samples(), source)
}

/// Slope of `log |X|_k` against `log k`, fitted with an intercept and
/// inverse-variance weights. Falls back to unweighted least squares when any
/// entry has zero standard error (e.g. exact synthetic curves).
pub fn estimate_theta_moments(curve: &MomentCurve) -> Result<TailEstimate> {
    let e = curve.entries();
    if e.len() < 4 {
        return Err(Error::invalid("moment fit needs at least 4 orders"));
    }
    let x: Vec<f64> = e.iter().map(|m| f64::from(m.k).ln()).collect();
    let y: Vec<f64> = e.iter().map(|m| m.log_norm).collect();
    let weights: Option<Vec<f64>> = if e.iter().all(|m| m.se > 0.0) {
        Some(e.iter().map(|m| 1.0 / (m.se * m.se)).collect())
    } else {
        None
    };
    let fit = fit_line(&x, &y, weights.as_deref())?;
    // Anything below 1e-9 is rounding noise on a flat curve.
    if !(fit.slope > 1e-9 && fit.slope.is_finite()) {
        return Err(Error::Degenerate(format!(
            "moment slope {} is not positive; no tail growth",
            fit.slope
        )));
    }
    Ok(TailEstimate {
        theta_hat: fit.slope,
        se_theta: fit.se_slope,
        method: TailMethod::MomentSlope,
        range: FitRange::Orders {
            k_min: e[0].k,
            k_max: e[e.len() - 1].k,
        },
        fit_residual: fit.rms_residual,
        effective_samples: curve.n_samples,
    })
}
