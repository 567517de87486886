//! Max and average pooling, and the check that pooling leaves the tail
//! parameter unchanged.
//!
//! A convolutional layer acts on each input region as a fully-connected
//! layer with the region as its input, so pooling is exercised here on units
//! of an ordinary fully-connected layer: the pooled region is a set of units
//! sharing one layer.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkConfig, Sampler, SignedLog, UnitKind, UnitRef, UnitSampleSet};
use crate::tail::{Estimator, TailEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingKind {
    Max,
    Average,
}

impl fmt::Display for PoolingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolingKind::Max => "max",
            PoolingKind::Average => "average",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolingSpec {
    pub kind: PoolingKind,
    pub region_size: usize,
}

impl PoolingSpec {
    pub fn new(kind: PoolingKind, region_size: usize) -> Result<Self> {
        if region_size == 0 {
            return Err(Error::invalid("pooling region must hold at least one value"));
        }
        Ok(PoolingSpec { kind, region_size })
    }
}

pub fn pool(values: &[f64], spec: &PoolingSpec) -> Result<f64> {
    if spec.region_size == 0 || values.len() != spec.region_size {
        return Err(Error::invalid(format!(
            "pooling region of size {} got {} values",
            spec.region_size,
            values.len()
        )));
    }
    Ok(pool_unchecked(values, spec.kind))
}

fn pool_unchecked(values: &[f64], kind: PoolingKind) -> f64 {
    match kind {
        PoolingKind::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        PoolingKind::Average => values.iter().sum::<f64>() / values.len() as f64,
    }
}

/// Allowance on top of the combined standard error.
pub const POOLING_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolingCheck {
    pub spec: PoolingSpec,
    pub layer: usize,
    pub region: Vec<usize>,
    /// Estimate for the first unit of the region.
    pub before: TailEstimate,
    /// Estimate for the pooled statistic over the same draws.
    pub after: TailEstimate,
    pub tolerance: f64,
    pub pass: bool,
}

/// Samples the region jointly, pools each draw and compares tail estimates
/// of the pooled value and of the region's first unit.
#[allow(clippy::too_many_arguments)]
pub fn pooled_tail_check(
    config: &NetworkConfig,
    x: &[f64],
    layer: usize,
    region: &[usize],
    spec: &PoolingSpec,
    kind: UnitKind,
    estimator: &Estimator,
    n_samples: usize,
    seed: u64,
) -> Result<PoolingCheck> {
    if region.len() != spec.region_size {
        return Err(Error::invalid("region length differs from the pooling spec"));
    }
    let mut seen = region.to_vec();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("pooling region has repeated units"));
    }
    let targets: Vec<UnitRef> = region.iter().map(|&u| UnitRef::new(layer, u, kind)).collect();
    let joint = Sampler::new(config, x)?.joint(&targets, n_samples, seed)?;

    let representative = joint.unit_set(0);
    let idx: Vec<usize> = (0..region.len()).collect();
    let pooled_raw = joint.combine(&idx, |row| pool_unchecked(row, spec.kind));
    let shift = joint.log_rescale[0];
    let pooled = UnitSampleSet {
        values: pooled_raw
            .iter()
            .map(|&v| {
                let mut s = SignedLog::from_f64(v);
                s.log_mag -= shift;
                s
            })
            .collect(),
        ..representative.clone()
    };

    let before = estimator.estimate(&representative)?;
    let after = estimator.estimate(&pooled)?;
    let tolerance = before.se_theta + after.se_theta + POOLING_TOLERANCE;
    Ok(PoolingCheck {
        spec: *spec,
        layer,
        region: region.to_vec(),
        pass: (after.theta_hat - before.theta_hat).abs() <= tolerance,
        before,
        after,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::sample_input;
    use crate::nonlinearity::NonlinearitySpec;
    use proptest::prelude::*;

    #[test]
    fn pool_examples() {
        let max = PoolingSpec::new(PoolingKind::Max, 3).unwrap();
        let avg = PoolingSpec::new(PoolingKind::Average, 3).unwrap();
        assert_eq!(pool(&[1.0, -2.0, 3.0], &max).unwrap(), 3.0);
        assert!((pool(&[1.0, -2.0, 3.0], &avg).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        for kind in [PoolingKind::Max, PoolingKind::Average] {
            let one = PoolingSpec::new(kind, 1).unwrap();
            assert_eq!(pool(&[-4.5], &one).unwrap(), -4.5);
        }
        assert!(pool(&[1.0, 2.0], &max).is_err());
        assert!(PoolingSpec::new(PoolingKind::Max, 0).is_err());
    }

    proptest! {
        #[test]
        fn max_dominates_average_on_nonnegative(v in prop::collection::vec(0.0f64..1e6, 1..16)) {
            let n = v.len();
            let m = pool(&v, &PoolingSpec::new(PoolingKind::Max, n).unwrap()).unwrap();
            let a = pool(&v, &PoolingSpec::new(PoolingKind::Average, n).unwrap()).unwrap();
            prop_assert!(m >= a * (1.0 - 1e-12));
        }

        #[test]
        fn max_ignores_order(mut v in prop::collection::vec(-1e6f64..1e6, 1..16)) {
            let spec = PoolingSpec::new(PoolingKind::Max, v.len()).unwrap();
            let a = pool(&v, &spec).unwrap();
            v.reverse();
            prop_assert_eq!(a, pool(&v, &spec).unwrap());
        }
    }

    #[test]
    fn region_of_one_is_identity() {
        let cfg = NetworkConfig::mlp(20, vec![10, 10], NonlinearitySpec::Relu);
        let x = sample_input(20, 1).unwrap();
        for kind in [PoolingKind::Max, PoolingKind::Average] {
            let spec = PoolingSpec::new(kind, 1).unwrap();
            let c = pooled_tail_check(&cfg, &x, 2, &[3], &spec, UnitKind::Post, &Estimator::default(), 20_000, 4)
                .unwrap();
            assert_eq!(c.before, c.after);
            assert!(c.pass);
        }
    }

    #[test]
    fn bad_regions_rejected() {
        let cfg = NetworkConfig::mlp(5, vec![4], NonlinearitySpec::Relu);
        let x = sample_input(5, 1).unwrap();
        let spec = PoolingSpec::new(PoolingKind::Max, 2).unwrap();
        let e = Estimator::default();
        assert!(pooled_tail_check(&cfg, &x, 1, &[1, 1], &spec, UnitKind::Post, &e, 1000, 0).is_err());
        assert!(pooled_tail_check(&cfg, &x, 1, &[1, 2, 3], &spec, UnitKind::Post, &e, 1000, 0).is_err());
        assert!(pooled_tail_check(&cfg, &x, 1, &[1, 9], &spec, UnitKind::Post, &e, 1000, 0).is_err());
    }
}
