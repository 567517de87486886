//! Weibull-plot estimate of the tail parameter from the upper order
//! statistics of `|X|`.

use super::fit::fit_line;
use super::{FitRange, TailEstimate, TailMethod};
use crate::error::{Error, Result};
use crate::network::UnitSampleSet;

pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;
pub const MIN_TAIL_POINTS: usize = 200;
const MIN_DISTINCT: usize = 10;

/// Regresses `log(-log S(x))` on `log x` over the top `tail_fraction` of
/// `|X|` and returns `theta = 1 / slope`.
///
/// The survival at the `i`-th smallest of `n` magnitudes uses the midpoint
/// plotting position `S = (n - i + 1/2) / n`, which keeps the largest point
/// finite. Everything runs on stored log-magnitudes.
pub fn estimate_theta_survival(samples: &UnitSampleSet, tail_fraction: f64) -> Result<TailEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction < 0.5) {
        return Err(Error::invalid(format!("tail_fraction must be in (0, 0.5), got {tail_fraction}")));
    }
    let n = samples.n_samples();
    let m = (tail_fraction * n as f64).floor() as usize;
    if m < MIN_TAIL_POINTS {
        return Err(Error::invalid(format!(
            "tail of {m} points; need tail_fraction * n >= {MIN_TAIL_POINTS}"
        )));
    }
    let mut logs: Vec<f64> = samples.log_abs().collect();
    if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    logs.sort_unstable_by(f64::total_cmp);
    let tail = &logs[n - m..];
    if tail[0] == f64::NEG_INFINITY {
        return Err(Error::Degenerate("tail contains zeros".into()));
    }
    let distinct = 1 + tail.windows(2).filter(|w| w[1] > w[0]).count();
    if distinct < MIN_DISTINCT {
        return Err(Error::Degenerate(format!("only {distinct} distinct tail values")));
    }
    let nf = n as f64;
    let y: Vec<f64> = (n - m + 1..=n)
        .map(|i| {
            let s = (nf - i as f64 + 0.5) / nf;
            (-s.ln()).ln()
        })
        .collect();
    let fit = fit_line(tail, &y, None).map_err(|_| Error::Degenerate("tail has no spread".into()))?;
    if !(fit.slope > 0.0 && fit.slope.is_finite()) {
        return Err(Error::Degenerate(format!("survival slope {} is not positive", fit.slope)));
    }
    Ok(TailEstimate {
        theta_hat: 1.0 / fit.slope,
        se_theta: fit.se_slope / (fit.slope * fit.slope),
        method: TailMethod::SurvivalSlope,
        range: FitRange::TailFraction(tail_fraction),
        fit_residual: fit.rms_residual,
        effective_samples: m,
    })
}
