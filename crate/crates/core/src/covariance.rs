//! Monte-Carlo check that powers of two units of one layer are
//! non-negatively correlated, with independence at the first layer.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkConfig, Sampler, UnitKind, UnitRef};
use crate::rng::derive_seed;

pub const MIN_COVARIANCE_SAMPLES: usize = 10_000;
/// Batches used for the batch-means standard error.
pub const BATCHES: usize = 40;
/// Verdict threshold in standard errors.
pub const VERDICT_SE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceVerdict {
    /// Significantly positive.
    NonnegativeConsistent,
    /// Within `VERDICT_SE` standard errors of zero.
    ZeroConsistent,
    /// Below `-VERDICT_SE` standard errors.
    Violation,
}

impl fmt::Display for CovarianceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceVerdict::NonnegativeConsistent => "nonnegative-consistent",
            CovarianceVerdict::ZeroConsistent => "zero-consistent",
            CovarianceVerdict::Violation => "violation",
        })
    }
}

impl CovarianceVerdict {
    pub fn classify(estimate: f64, se: f64) -> Self {
        if estimate < -VERDICT_SE * se {
            CovarianceVerdict::Violation
        } else if estimate.abs() <= VERDICT_SE * se {
            CovarianceVerdict::ZeroConsistent
        } else {
            CovarianceVerdict::NonnegativeConsistent
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub layer: usize,
    pub pair: (usize, usize),
    pub s: u32,
    pub t: u32,
    /// `Cov[h_m^s, h_m'^t]`
    pub estimate: f64,
    pub se: f64,
    pub n_samples: usize,
    pub verdict: CovarianceVerdict,
}

/// Covariance of `a^s` and `b^t` with a batch-means standard error.
pub fn covariance_of_powers(a: &[f64], b: &[f64], s: u32, t: u32) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::invalid("covariance columns differ in length"));
    }
    if s == 0 || t == 0 {
        return Err(Error::invalid("powers must be >= 1"));
    }
    let n = a.len();
    if n < MIN_COVARIANCE_SAMPLES {
        return Err(Error::invalid(format!(
            "covariance needs at least {MIN_COVARIANCE_SAMPLES} samples, got {n}"
        )));
    }
    let (si, ti) = (s as i32, t as i32);
    let mut pa = Vec::with_capacity(n);
    let mut pb = Vec::with_capacity(n);
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = (x.powi(si), y.powi(ti));
        // The estimator's variance involves u^2 and v^2.
        if !(u * u).is_finite() || !(v * v).is_finite() || !(u * v).is_finite() {
            return Err(Error::MomentOverflow(format!(
                "powers ({s}, {t}) overflow on values {x:e}, {y:e}"
            )));
        }
        pa.push(u);
        pb.push(v);
    }
    let cov = |lo: usize, hi: usize| {
        let m = (hi - lo) as f64;
        let ma = pa[lo..hi].iter().sum::<f64>() / m;
        let mb = pb[lo..hi].iter().sum::<f64>() / m;
        pa[lo..hi]
            .iter()
            .zip(&pb[lo..hi])
            .map(|(u, v)| (u - ma) * (v - mb))
            .sum::<f64>()
            / m
    };
    let estimate = cov(0, n);
    let size = n / BATCHES;
    let batch: Vec<f64> = (0..BATCHES)
        .map(|i| {
            let hi = if i + 1 == BATCHES { n } else { (i + 1) * size };
            cov(i * size, hi)
        })
        .collect();
    let mean = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    let se = (var / BATCHES as f64).sqrt();
    if !(estimate.is_finite() && se.is_finite()) {
        return Err(Error::MomentOverflow(format!("powers ({s}, {t})")));
    }
    Ok((estimate, se))
}

fn check_pair(config: &NetworkConfig, layer: usize, pair: (usize, usize)) -> Result<()> {
    if pair.0 == pair.1 {
        return Err(Error::invalid("covariance needs two distinct units"));
    }
    if layer == 0 || layer > config.depth() {
        return Err(Error::invalid(format!("layer {layer} outside the network")));
    }
    Ok(())
}

fn draw_pair(
    config: &NetworkConfig,
    x: &[f64],
    layer: usize,
    pair: (usize, usize),
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(config, layer, pair)?;
    if n_samples < MIN_COVARIANCE_SAMPLES {
        return Err(Error::invalid(format!(
            "covariance needs at least {MIN_COVARIANCE_SAMPLES} samples"
        )));
    }
    let targets = [
        UnitRef::new(layer, pair.0, UnitKind::Post),
        UnitRef::new(layer, pair.1, UnitKind::Post),
    ];
    let mut joint = Sampler::new(config, x)?.joint(&targets, n_samples, seed)?;
    let b = joint.columns.pop().expect("two columns");
    let a = joint.columns.pop().expect("two columns");
    Ok((a, b))
}

/// Estimates `Cov[h_m^s, h_m'^t]` for post-nonlinearities of `layer`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_unit_covariance(
    config: &NetworkConfig,
    x: &[f64],
    layer: usize,
    pair: (usize, usize),
    s: u32,
    t: u32,
    n_samples: usize,
    seed: u64,
) -> Result<CovarianceReport> {
    if s == 0 || t == 0 {
        return Err(Error::invalid("powers must be >= 1"));
    }
    let (a, b) = draw_pair(config, x, layer, pair, n_samples, seed)?;
    report(layer, pair, s, t, &a, &b)
}

fn report(layer: usize, pair: (usize, usize), s: u32, t: u32, a: &[f64], b: &[f64]) -> Result<CovarianceReport> {
    let (estimate, se) = covariance_of_powers(a, b, s, t)?;
    Ok(CovarianceReport {
        layer,
        pair,
        s,
        t,
        estimate,
        se,
        n_samples: a.len(),
        verdict: CovarianceVerdict::classify(estimate, se),
    })
}

/// Seed used by `sweep` for the draws of `layer`.
pub fn layer_seed(seed: u64, layer: usize) -> u64 {
    derive_seed(seed, layer as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub layer: usize,
    pub s: u32,
    pub t: u32,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSweep {
    pub reports: Vec<CovarianceReport>,
    pub failures: Vec<CellFailure>,
}

impl CovarianceSweep {
    pub fn count(&self, verdict: CovarianceVerdict) -> usize {
        self.reports.iter().filter(|r| r.verdict == verdict).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "layer,m,m_prime,s,t,estimate,se,verdict")?;
        for r in &self.reports {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.layer, r.pair.0, r.pair.1, r.s, r.t, r.estimate, r.se, r.verdict
            )?;
        }
        for f in &self.failures {
            writeln!(w, "{},,,{},{},,,error: {}", f.layer, f.s, f.t, f.error.replace(',', ";"))?;
        }
        Ok(())
    }
}

/// Every `(layer, (s, t))` cell for units `pair`. Each layer is sampled once
/// with `layer_seed(seed, layer)`, so a cell equals
/// `estimate_unit_covariance` called with that seed. Failed cells are
/// recorded and the sweep continues.
pub fn sweep(
    config: &NetworkConfig,
    x: &[f64],
    layers: &[usize],
    powers: &[(u32, u32)],
    pair: (usize, usize),
    n_samples: usize,
    seed: u64,
) -> CovarianceSweep {
    let mut out = CovarianceSweep::default();
    for &layer in layers {
        let fail = |out: &mut CovarianceSweep, s, t, e: &Error| {
            out.failures.push(CellFailure {
                layer,
                s,
                t,
                error: e.to_string(),
            })
        };
        match draw_pair(config, x, layer, pair, n_samples, layer_seed(seed, layer)) {
            Ok((a, b)) => {
                for &(s, t) in powers {
                    match report(layer, pair, s, t, &a, &b) {
                        Ok(r) => out.reports.push(r),
                        Err(e) => fail(&mut out, s, t, &e),
                    }
                }
            }
            Err(e) => {
                for &(s, t) in powers {
                    fail(&mut out, s, t, &e);
                }
            }
        }
    }
    out
}

/// `{1..=max}^2` in row-major order.
pub fn power_grid(max: u32) -> Vec<(u32, u32)> {
    (1..=max).flat_map(|s| (1..=max).map(move |t| (s, t))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::sample_input;
    use crate::nonlinearity::NonlinearitySpec;

    fn net() -> (NetworkConfig, Vec<f64>) {
        let cfg = NetworkConfig::mlp(10, vec![10, 10, 10], NonlinearitySpec::Relu);
        (cfg, sample_input(10, 2).unwrap())
    }

    #[test]
    fn classify_thresholds() {
        assert_eq!(CovarianceVerdict::classify(-0.31, 0.1), CovarianceVerdict::Violation);
        assert_eq!(CovarianceVerdict::classify(-0.3, 0.1), CovarianceVerdict::ZeroConsistent);
        assert_eq!(CovarianceVerdict::classify(0.3, 0.1), CovarianceVerdict::ZeroConsistent);
        assert_eq!(CovarianceVerdict::classify(0.31, 0.1), CovarianceVerdict::NonnegativeConsistent);
    }

    #[test]
    fn covariance_of_known_pairs() {
        let n = 20_000;
        let a: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
        let (c, _) = covariance_of_powers(&a, &a, 1, 1).unwrap();
        let mean = a.iter().sum::<f64>() / n as f64;
        let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((c - var).abs() < 1e-9);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let (c, se) = covariance_of_powers(&a, &neg, 1, 1).unwrap();
        assert_eq!(CovarianceVerdict::classify(c, se), CovarianceVerdict::Violation);
    }

    #[test]
    fn argument_errors() {
        let (cfg, x) = net();
        assert!(estimate_unit_covariance(&cfg, &x, 1, (0, 0), 1, 1, 20_000, 0).is_err());
        assert!(estimate_unit_covariance(&cfg, &x, 1, (0, 1), 0, 1, 20_000, 0).is_err());
        assert!(estimate_unit_covariance(&cfg, &x, 1, (0, 1), 1, 1, 100, 0).is_err());
        assert!(estimate_unit_covariance(&cfg, &x, 4, (0, 1), 1, 1, 20_000, 0).is_err());
    }

    #[test]
    fn huge_powers_report_overflow() {
        let a = vec![1e100; 20_000];
        assert!(matches!(covariance_of_powers(&a, &a, 3, 3), Err(Error::MomentOverflow(_))));
    }

    #[test]
    fn first_layer_is_zero_consistent() {
        let (cfg, x) = net();
        for (s, t) in [(1, 1), (2, 3)] {
            let r = estimate_unit_covariance(&cfg, &x, 1, (0, 1), s, t, 100_000, 3).unwrap();
            assert_eq!(r.verdict, CovarianceVerdict::ZeroConsistent, "{r:?}");
        }
    }

    #[test]
    fn sweep_matches_single_cells_and_records_failures() {
        let (cfg, x) = net();
        let sw = sweep(&cfg, &x, &[2, 7], &[(1, 1), (2, 1)], (0, 1), 20_000, 11);
        assert_eq!(sw.reports.len(), 2);
        assert_eq!(sw.failures.len(), 2);
        let single = estimate_unit_covariance(&cfg, &x, 2, (0, 1), 2, 1, 20_000, layer_seed(11, 2)).unwrap();
        assert_eq!(sw.reports[1], single);
        assert!(sweep(&cfg, &x, &[], &power_grid(3), (0, 1), 20_000, 1).reports.is_empty());
    }

    #[test]
    fn sweep_is_deterministic() {
        let (cfg, x) = net();
        let a = sweep(&cfg, &x, &[1, 2], &power_grid(2), (0, 1), 20_000, 5);
        let b = sweep(&cfg, &x, &[1, 2], &power_grid(2), (0, 1), 20_000, 5);
        assert_eq!(a, b);
    }
}
