//! Reproducible experiment runs.
//!
//! A [`RunSpec`] fully determines the CSV files a command produces. Running
//! it computes every file in memory; [`write_run`] then writes them together
//! with a `manifest.json` holding the spec, the seed and the SHA-256 of each
//! file, so [`rerun`] can replay a manifest and compare hashes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::covariance::{power_grid, sweep, CovarianceVerdict};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::network::{
    forward, sample_input, sample_weights, NetworkConfig, Sampler, UnitKind, UnitRef,
    UnitSampleSet,
};
use crate::nonlinearity::{search_envelope_constants, EnvelopeGrid, EnvelopeSearch, NonlinearitySpec};
use crate::penalty::{contour, equal_coordinate_point, layer_exponent, unit_penalty};
use crate::rng::{stream, Domain};
use crate::tail::{
    empirical_log_norm, estimate_theta_moments, estimate_theta_survival, gaussian_norm_oracle,
    moment_curve, recursion_check, TailEstimate, DEFAULT_K_MAX, DEFAULT_K_MIN,
    DEFAULT_TAIL_FRACTION,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Relative error allowed by `oracle-check`.
pub const ORACLE_TOLERANCE: f64 = 0.02;
/// Largest contour deviation from the ball equation.
pub const CONTOUR_TOLERANCE: f64 = 1e-9;
/// Survival level whose grid point anchors the layer-ordering comparison.
pub const ORDERING_LEVEL: f64 = 1e-3;
/// Band, in standard errors, for matching the layer-1 curve to the Gaussian.
pub const REFERENCE_Z: f64 = 4.0;
/// Grid points with fewer exceedances are left out of the Gaussian match.
pub const REFERENCE_MIN_COUNT: usize = 20;

fn default_network() -> NetworkConfig {
    NetworkConfig::mlp(100, vec![100; 3], NonlinearitySpec::Relu)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    TailSweep {
        network: NetworkConfig,
        layers: Vec<usize>,
        kind: UnitKind,
        unit: usize,
        n_samples: usize,
        k_min: u32,
        k_max: u32,
        tail_fraction: f64,
    },
    Figure3 {
        network: NetworkConfig,
        layers: Vec<usize>,
        n_samples: usize,
        #[serde(default = "default_true")]
        standardize: bool,
        grid_points: usize,
    },
    Covariance {
        network: NetworkConfig,
        layers: Vec<usize>,
        max_power: u32,
        pair: (usize, usize),
        n_samples: usize,
    },
    Envelope {
        families: Vec<NonlinearitySpec>,
        grid: EnvelopeGrid,
    },
    Contours {
        layers: Vec<usize>,
        t: f64,
        n_points: usize,
    },
    OracleCheck {
        sigma: f64,
        k_max: u32,
        n_samples: usize,
    },
    Penalty {
        network: NetworkConfig,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TailSweep { .. } => "tail-sweep",
            Command::Figure3 { .. } => "figure3",
            Command::Covariance { .. } => "covariance",
            Command::Envelope { .. } => "envelope",
            Command::Contours { .. } => "contours",
            Command::OracleCheck { .. } => "oracle-check",
            Command::Penalty { .. } => "penalty",
        }
    }

    pub fn tail_sweep(network: NetworkConfig, n_samples: usize) -> Self {
        Command::TailSweep {
            layers: (1..=network.depth()).collect(),
            network,
            kind: UnitKind::Pre,
            unit: 0,
            n_samples,
            k_min: DEFAULT_K_MIN,
            k_max: DEFAULT_K_MAX,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }

    /// Ten ReLU layers of width 100, layers 1, 2, 3 and 10.
    pub fn figure3_default(n_samples: usize) -> Self {
        Command::Figure3 {
            network: NetworkConfig::mlp(100, vec![100; 10], NonlinearitySpec::Relu),
            layers: vec![1, 2, 3, 10],
            n_samples,
            standardize: true,
            grid_points: 400,
        }
    }

    pub fn covariance_default(n_samples: usize) -> Self {
        Command::Covariance {
            network: default_network(),
            layers: vec![1, 2, 3],
            max_power: 3,
            pair: (0, 1),
            n_samples,
        }
    }

    /// The four families with linear envelopes and the two bounded ones.
    pub fn envelope_default() -> Self {
        Command::Envelope {
            families: vec![
                NonlinearitySpec::Relu,
                NonlinearitySpec::Prelu { alpha: 0.1 },
                NonlinearitySpec::Elu { alpha: 1.0 },
                NonlinearitySpec::SELU,
                NonlinearitySpec::Tanh,
                NonlinearitySpec::Sigmoid,
            ],
            grid: EnvelopeGrid::default(),
        }
    }

    /// Layers 1, 2, 3 and 10, i.e. `q` in {2, 1, 2/3, 1/5}.
    pub fn contours_default() -> Self {
        Command::Contours {
            layers: vec![1, 2, 3, 10],
            t: 1.0,
            n_points: 720,
        }
    }

    pub fn oracle_default(n_samples: usize) -> Self {
        Command::OracleCheck {
            sigma: 1.0,
            k_max: 8,
            n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub seed: u64,
    #[serde(flatten)]
    pub command: Command,
}

impl RunSpec {
    pub fn new(command: Command, seed: u64) -> Self {
        RunSpec { seed, command }
    }
}

/// One emitted data file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, s: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: s.into_bytes(),
        }
    }

    fn csv(name: impl Into<String>, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Self {
        let mut bytes = Vec::new();
        f(&mut bytes).expect("writing to memory");
        Artifact {
            name: name.into(),
            bytes,
        }
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.bytes).unwrap_or("")
    }
}

/// Files of a finished run plus the verdict counts `--assert` looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Human-readable one-line summaries.
    pub summary: Vec<String>,
    /// Statistical or numerical checks that came out negative.
    pub violations: usize,
    /// Computations that failed and were recorded instead of aborting.
    pub failures: usize,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

pub fn run(spec: &RunSpec) -> Result<RunOutput> {
    let seed = spec.seed;
    match &spec.command {
        Command::TailSweep {
            network,
            layers,
            kind,
            unit,
            n_samples,
            k_min,
            k_max,
            tail_fraction,
        } => run_tail_sweep(network, layers, *kind, *unit, *n_samples, (*k_min, *k_max), *tail_fraction, seed),
        Command::Figure3 {
            network,
            layers,
            n_samples,
            standardize,
            grid_points,
        } => run_figure3(network, layers, *n_samples, *standardize, *grid_points, seed),
        Command::Covariance {
            network,
            layers,
            max_power,
            pair,
            n_samples,
        } => run_covariance(network, layers, *max_power, *pair, *n_samples, seed),
        Command::Envelope { families, grid } => run_envelope(families, grid),
        Command::Contours { layers, t, n_points } => run_contours(layers, *t, *n_points),
        Command::OracleCheck {
            sigma,
            k_max,
            n_samples,
        } => run_oracle(*sigma, *k_max, *n_samples, seed),
        Command::Penalty { network } => run_penalty(network, seed),
    }
}

fn check_layers(network: &NetworkConfig, layers: &[usize]) -> Result<()> {
    network.validate()?;
    if layers.is_empty() {
        return Err(Error::invalid("no layers requested"));
    }
    if let Some(&l) = layers.iter().find(|&&l| l == 0 || l > network.depth()) {
        return Err(Error::invalid(format!(
            "layer {l} outside the network of depth {}",
            network.depth()
        )));
    }
    Ok(())
}

/// Joint draws of `unit` at every requested layer, one set per layer.
fn layer_samples(
    network: &NetworkConfig,
    layers: &[usize],
    unit: usize,
    kind: UnitKind,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<UnitSampleSet>> {
    let x = sample_input(network.input_dim, seed)?;
    let targets: Vec<UnitRef> = layers.iter().map(|&l| UnitRef::new(l, unit, kind)).collect();
    let joint = Sampler::new(network, &x)?.joint(&targets, n_samples, seed)?;
    Ok((0..layers.len()).map(|i| joint.unit_set(i)).collect())
}

fn estimate_cell(r: &Result<TailEstimate>) -> String {
    match r {
        Ok(e) => format!(
            "{},{},{},{},{},{},ok",
            e.method, e.range, e.theta_hat, e.se_theta, e.fit_residual, e.effective_samples
        ),
        Err(e) => format!(",,,,,,error: {}", e.to_string().replace(',', ";")),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_tail_sweep(
    network: &NetworkConfig,
    layers: &[usize],
    kind: UnitKind,
    unit: usize,
    n_samples: usize,
    (k_min, k_max): (u32, u32),
    tail_fraction: f64,
    seed: u64,
) -> Result<RunOutput> {
    check_layers(network, layers)?;
    let sets = layer_samples(network, layers, unit, kind, n_samples, seed)?;
    let mut artifacts = Vec::new();
    let mut summary_csv = String::from(
        "layer,kind,method,range,theta_hat,se_theta,fit_residual,effective_samples,status\n",
    );
    let mut moment_estimates = Vec::new();
    let mut survival_estimates = Vec::new();
    let mut summary = Vec::new();
    let mut failures = 0;

    for (&layer, set) in layers.iter().zip(&sets) {
        let moment = moment_curve(set, k_min, k_max).and_then(|curve| {
            let est = estimate_theta_moments(&curve);
            artifacts.push(Artifact::csv(format!("moments_layer{layer}.csv"), |w| {
                curve.write_csv(w)
            }));
            est
        });
        let survival = estimate_theta_survival(set, tail_fraction);
        for r in [&moment, &survival] {
            let _ = writeln!(summary_csv, "{layer},{kind},{}", estimate_cell(r));
            failures += r.is_err() as usize;
        }
        summary.push(format!(
            "layer {layer}: moment-slope {} survival-slope {}",
            describe(&moment),
            describe(&survival)
        ));
        moment_estimates.push((layer, moment.ok()));
        survival_estimates.push((layer, survival.ok()));
    }

    let mut rec = String::from(
        "layer_prev,layer_next,method,theta_prev,theta_next,increment,tolerance,pass\n",
    );
    let mut violations = 0;
    for estimates in [&moment_estimates, &survival_estimates] {
        for w in estimates.windows(2) {
            let ((lp, Some(a)), (ln, Some(b))) = (&w[0], &w[1]) else { continue };
            if *ln != lp + 1 {
                continue;
            }
            let v = recursion_check(a, b)?;
            violations += !v.pass as usize;
            let _ = writeln!(
                rec,
                "{lp},{ln},{},{},{},{},{},{}",
                a.method, v.theta_prev, v.theta_next, v.increment, v.tolerance, v.pass
            );
        }
    }
    artifacts.push(Artifact::text("tail_summary.csv", summary_csv));
    artifacts.push(Artifact::text("recursion.csv", rec));
    Ok(RunOutput {
        artifacts,
        summary,
        violations,
        failures,
    })
}

fn describe(r: &Result<TailEstimate>) -> String {
    match r {
        Ok(e) => format!("{:.3} (se {:.3})", e.theta_hat, e.se_theta),
        Err(e) => format!("failed: {e}"),
    }
}

/// `2 Phi^-1(3/4)`, the interquartile range of a standard normal.
pub fn gaussian_iqr() -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * n.inverse_cdf(0.75)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    // Type-7 (linear interpolation) quantile.
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Samples divided by their interquartile range. Works from the
/// log-magnitudes relative to the largest one, so it is safe for values far
/// outside double range.
pub fn standardize_iqr(set: &UnitSampleSet) -> Result<Vec<f64>> {
    let top = set
        .log_abs()
        .filter(|l| l.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Degenerate("all samples are zero".into()));
    }
    let mut rel: Vec<f64> = set
        .values
        .iter()
        .map(|v| f64::from(v.sign) * (v.log_mag - top).exp())
        .collect();
    let mut sorted = rel.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    if !(iqr > 0.0) {
        return Err(Error::Degenerate("interquartile range is zero".into()));
    }
    for v in &mut rel {
        *v /= iqr;
    }
    Ok(rel)
}

/// Empirical survival of the positive half of one layer's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub layer: usize,
    /// Number of positive samples.
    pub n_positive: usize,
    /// `P(X > x | X > 0)` on the grid, as exceedance counts.
    pub counts: Vec<usize>,
}

impl SurvivalCurve {
    /// Positive values, sorted ascending, counted against `grid`.
    pub fn from_positive(layer: usize, mut positive: Vec<f64>, grid: &[f64]) -> Self {
        positive.sort_unstable_by(f64::total_cmp);
        let n = positive.len();
        let counts = grid
            .iter()
            .map(|&x| n - positive.partition_point(|&v| v <= x))
            .collect();
        SurvivalCurve {
            layer,
            n_positive: n,
            counts,
        }
    }

    pub fn survival(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.n_positive as f64
    }

    pub fn log_survival(&self, i: usize) -> f64 {
        self.survival(i).ln()
    }

    /// Binomial standard error of `log S`.
    pub fn se_log_survival(&self, i: usize) -> f64 {
        let s = self.survival(i);
        ((1.0 - s) / (self.n_positive as f64 * s)).sqrt()
    }

    /// First grid index with `S <= level`.
    pub fn quantile_index(&self, level: f64) -> Option<usize> {
        (0..self.counts.len()).find(|&i| self.survival(i) <= level)
    }
}

/// `log P(Z > x | Z > 0) = log(2 Q(x / scale))` for a centered Gaussian.
pub fn gaussian_log_survival(x: f64, scale: f64) -> f64 {
    erfc(x / (scale * std::f64::consts::SQRT_2)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingPoint {
    pub anchor_layer: usize,
    pub x: f64,
    pub log_survival: Vec<f64>,
    pub increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub points: Vec<OrderingPoint>,
    pub pass: bool,
}

/// At each curve's `ORDERING_LEVEL` grid point, log-survival must strictly
/// increase with layer. Points where some curve has no exceedances are
/// skipped; the check fails if nothing is left to compare.
pub fn ordering_check(curves: &[SurvivalCurve], grid: &[f64]) -> OrderingCheck {
    let mut order: Vec<&SurvivalCurve> = curves.iter().collect();
    order.sort_by_key(|c| c.layer);
    let points: Vec<OrderingPoint> = order
        .iter()
        .filter_map(|anchor| {
            let i = anchor.quantile_index(ORDERING_LEVEL)?;
            if order.iter().any(|c| c.counts[i] == 0) {
                return None;
            }
            let ls: Vec<f64> = order.iter().map(|c| c.log_survival(i)).collect();
            Some(OrderingPoint {
                anchor_layer: anchor.layer,
                x: grid[i],
                increasing: ls.windows(2).all(|w| w[1] > w[0]),
                log_survival: ls,
            })
        })
        .collect();
    OrderingCheck {
        pass: !points.is_empty() && points.iter().all(|p| p.increasing),
        points,
    }
}

/// Largest `|log S_emp - log S_ref| / se` over grid points with at least
/// `REFERENCE_MIN_COUNT` exceedances.
pub fn reference_max_z(curve: &SurvivalCurve, grid: &[f64], scale: f64) -> f64 {
    (0..grid.len())
        .filter(|&i| curve.counts[i] >= REFERENCE_MIN_COUNT && curve.counts[i] < curve.n_positive)
        .map(|i| {
            (curve.log_survival(i) - gaussian_log_survival(grid[i], scale)).abs()
                / curve.se_log_survival(i)
        })
        .fold(0.0, f64::max)
}

fn run_figure3(
    network: &NetworkConfig,
    layers: &[usize],
    n_samples: usize,
    standardize: bool,
    grid_points: usize,
    seed: u64,
) -> Result<RunOutput> {
    check_layers(network, layers)?;
    if grid_points < 2 {
        return Err(Error::invalid("grid needs at least 2 points"));
    }
    let sets = layer_samples(network, layers, 0, UnitKind::Pre, n_samples, seed)?;
    let mut positives = Vec::with_capacity(sets.len());
    for set in &sets {
        let values = if standardize {
            standardize_iqr(set)?
        } else {
            set.decoded()
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "layer {} values exceed double range; enable standardize",
                set.layer
            )));
        }
        let mut pos: Vec<f64> = values.into_iter().filter(|&v| v > 0.0).collect();
        if pos.len() < 2 {
            return Err(Error::Degenerate(format!("layer {} has no positive samples", set.layer)));
        }
        pos.sort_unstable_by(f64::total_cmp);
        positives.push(pos);
    }
    let x_max = positives
        .iter()
        .map(|p| quantile_sorted(p, 0.9999))
        .fold(0.0, f64::max);
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| x_max * i as f64 / (grid_points - 1) as f64)
        .collect();
    let curves: Vec<SurvivalCurve> = layers
        .iter()
        .zip(positives)
        .map(|(&l, p)| SurvivalCurve::from_positive(l, p, &grid))
        .collect();

    let mut artifacts = Vec::new();
    for c in &curves {
        let mut s = format!(
            "# layer={} n_samples={n_samples} n_positive={} standardized={standardize}\nx,log_survival,se,count\n",
            c.layer, c.n_positive
        );
        for (i, x) in grid.iter().enumerate() {
            let _ = writeln!(s, "{x},{},{},{}", c.log_survival(i), c.se_log_survival(i), c.counts[i]);
        }
        artifacts.push(Artifact::text(format!("survival_layer{}.csv", c.layer), s));
    }

    let mut summary = Vec::new();
    let mut violations = 0;
    // Layer-1 pre-nonlinearities are exactly N(0, sigma^2 |x|^2).
    if let Some(c1) = curves.iter().find(|c| c.layer == 1) {
        let scale = if standardize {
            1.0 / gaussian_iqr()
        } else {
            let x = sample_input(network.input_dim, seed)?;
            let bias = if network.include_bias { 1.0 } else { 0.0 };
            network.sigma(1) * (x.iter().map(|v| v * v).sum::<f64>() + bias).sqrt()
        };
        let mut s = String::from("x,log_survival\n");
        for &x in &grid {
            let _ = writeln!(s, "{x},{}", gaussian_log_survival(x, scale));
        }
        artifacts.push(Artifact::text("gaussian_reference.csv", s));
        let z = reference_max_z(c1, &grid, scale);
        let ok = z <= REFERENCE_Z;
        violations += !ok as usize;
        summary.push(format!("layer 1 vs Gaussian: max |z| = {z:.2} ({})", verdict(ok)));
    }

    let ord = ordering_check(&curves, &grid);
    let mut s = String::from("anchor_layer,x,");
    s.push_str(
        &curves
            .iter()
            .map(|c| format!("log_survival_layer{}", c.layer))
            .collect::<Vec<_>>()
            .join(","),
    );
    s.push_str(",increasing\n");
    for p in &ord.points {
        let ls: Vec<String> = p.log_survival.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{},{},{},{}", p.anchor_layer, p.x, ls.join(","), p.increasing);
    }
    artifacts.push(Artifact::text("ordering.csv", s));
    violations += !ord.pass as usize;
    summary.push(format!(
        "tail ordering over {} anchor points: {}",
        ord.points.len(),
        verdict(ord.pass)
    ));
    Ok(RunOutput {
        artifacts,
        summary,
        violations,
        failures: 0,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn run_covariance(
    network: &NetworkConfig,
    layers: &[usize],
    max_power: u32,
    pair: (usize, usize),
    n_samples: usize,
    seed: u64,
) -> Result<RunOutput> {
    check_layers(network, layers)?;
    if max_power == 0 {
        return Err(Error::invalid("max_power must be >= 1"));
    }
    let x = sample_input(network.input_dim, seed)?;
    let sw = sweep(network, &x, layers, &power_grid(max_power), pair, n_samples, seed);
    let counts = [
        CovarianceVerdict::NonnegativeConsistent,
        CovarianceVerdict::ZeroConsistent,
        CovarianceVerdict::Violation,
    ]
    .map(|v| (v, sw.count(v)));
    let mut summary: Vec<String> = counts.iter().map(|(v, n)| format!("{v}: {n}")).collect();
    if !sw.failures.is_empty() {
        summary.push(format!("failed cells: {}", sw.failures.len()));
    }
    Ok(RunOutput {
        artifacts: vec![Artifact::csv("covariance.csv", |w| sw.write_csv(w))],
        summary,
        violations: counts[2].1,
        failures: sw.failures.len(),
    })
}

fn run_envelope(families: &[NonlinearitySpec], grid: &EnvelopeGrid) -> Result<RunOutput> {
    let mut s = String::from("family,outcome,c1,d1,side,c2,d2,sup_abs\n");
    let mut summary = Vec::new();
    let mut violations = 0;
    for spec in families {
        match search_envelope_constants(spec, grid)? {
            EnvelopeSearch::Certified(w) => {
                let c = &w.constants;
                let outcome = if w.holds() { "holds" } else { "fails" };
                violations += !w.holds() as usize;
                let _ = writeln!(s, "\"{spec}\",{outcome},{},{},{},{},{},", c.c1, c.d1, c.side, c.c2, c.d2);
                summary.push(format!("{spec}: {outcome}"));
            }
            EnvelopeSearch::Bounded { sup_abs, .. } => {
                let _ = writeln!(s, "\"{spec}\",bounded,,,,,,{sup_abs}");
                summary.push(format!("{spec}: bounded"));
            }
        }
    }
    Ok(RunOutput {
        artifacts: vec![Artifact::text("envelope.csv", s)],
        summary,
        violations,
        failures: 0,
    })
}

fn run_contours(layers: &[usize], t: f64, n_points: usize) -> Result<RunOutput> {
    if layers.is_empty() || layers.contains(&0) {
        return Err(Error::invalid("contour layers must be >= 1"));
    }
    let mut artifacts = Vec::new();
    let mut eq = String::from("layer,q,equal_coordinate\n");
    let mut summary = Vec::new();
    let mut violations = 0;
    let mut prev = f64::INFINITY;
    let mut sorted = layers.to_vec();
    sorted.sort_unstable();
    for &l in layers {
        let q = layer_exponent(l);
        let c = contour(q, t, n_points)?;
        let err = c.max_relative_error();
        violations += (err > CONTOUR_TOLERANCE) as usize;
        summary.push(format!("layer {l} q={q}: max relative error {err:e}"));
        artifacts.push(Artifact::csv(format!("contour_layer{l}.csv"), |w| c.write_csv(w)));
    }
    for &l in &sorted {
        let q = layer_exponent(l);
        let p = equal_coordinate_point(q, t);
        violations += (p >= prev) as usize;
        prev = p;
        let _ = writeln!(eq, "{l},{q},{p}");
    }
    artifacts.push(Artifact::text("equal_coordinate.csv", eq));
    Ok(RunOutput {
        artifacts,
        summary,
        violations,
        failures: 0,
    })
}

/// `n` i.i.d. `N(0, sigma^2)` draws from the synthetic stream of `seed`.
pub fn gaussian_samples(sigma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Domain::Synthetic, 0);
    (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn run_oracle(sigma: f64, k_max: u32, n_samples: usize, seed: u64) -> Result<RunOutput> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be >= 1"));
    }
    let set = UnitSampleSet::synthetic("gaussian", &gaussian_samples(sigma, n_samples, seed));
    let mut s = String::from("k,empirical_norm,oracle_norm,relative_error,se_log_norm\n");
    let mut worst = 0.0f64;
    let mut violations = 0;
    for k in 1..=k_max {
        let (log_norm, se) = empirical_log_norm(&set, k)?;
        let oracle = gaussian_norm_oracle(sigma, k)?;
        let emp = log_norm.exp();
        let rel = (emp - oracle).abs() / oracle;
        worst = worst.max(rel);
        violations += (rel > ORACLE_TOLERANCE) as usize;
        let _ = writeln!(s, "{k},{emp},{oracle},{rel},{se}");
    }
    Ok(RunOutput {
        artifacts: vec![Artifact::text("oracle_check.csv", s)],
        summary: vec![format!("max relative error {worst:.5} over k = 1..{k_max}")],
        violations,
        failures: 0,
    })
}

fn run_penalty(network: &NetworkConfig, seed: u64) -> Result<RunOutput> {
    network.validate()?;
    let x = sample_input(network.input_dim, seed)?;
    let w = sample_weights(network, seed)?;
    let pass = forward(&w, &x, network)?;
    let units: Vec<Vec<f64>> = pass.layers.iter().map(|l| l.pre.clone()).collect();
    let b = unit_penalty(&units)?.with_weights(&w);
    Ok(RunOutput {
        summary: vec![format!("total unit penalty {}", b.total_unit_penalty)],
        artifacts: vec![Artifact::text("penalty.txt", b.to_report())],
        violations: 0,
        failures: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHash {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub spec: RunSpec,
    pub artifacts: Vec<ArtifactHash>,
    pub violations: usize,
    pub failures: usize,
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Writes every artifact and `manifest.json` into `out_dir`.
pub fn write_run(out_dir: &Path, spec: &RunSpec, out: &RunOutput, duration: Duration) -> Result<RunManifest> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut hashes = Vec::new();
    for a in &out.artifacts {
        let path = out_dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(|e| Error::io(&path, e))?;
        hashes.push(ArtifactHash {
            file: a.name.clone(),
            sha256: sha256_hex(&a.bytes),
            bytes: a.bytes.len(),
        });
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: spec.command.name().into(),
        seed: spec.seed,
        spec: spec.clone(),
        artifacts: hashes,
        violations: out.violations,
        failures: out.failures,
        duration_secs: duration.as_secs_f64(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Runs `spec` and writes the results, timing the computation.
pub fn execute(spec: &RunSpec, out_dir: &Path) -> Result<(RunOutput, RunManifest)> {
    let start = std::time::Instant::now();
    let out = run(spec)?;
    let manifest = write_run(out_dir, spec, &out, start.elapsed())?;
    Ok((out, manifest))
}

/// Files whose hash differs from the manifest after a replay.
#[derive(Debug, Clone, PartialEq)]
pub struct RerunReport {
    pub out_dir: PathBuf,
    pub mismatched: Vec<String>,
}

impl RerunReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Replays the manifest at `manifest_path` into `out_dir` and compares hashes.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<RerunReport> {
    let old = RunManifest::load(manifest_path)?;
    let (_, new) = execute(&old.spec, out_dir)?;
    let mut mismatched: Vec<String> = old
        .artifacts
        .iter()
        .filter(|a| !new.artifacts.iter().any(|b| b.file == a.file && b.sha256 == a.sha256))
        .map(|a| a.file.clone())
        .collect();
    mismatched.extend(
        new.artifacts
            .iter()
            .filter(|b| !old.artifacts.iter().any(|a| a.file == b.file))
            .map(|b| b.file.clone()),
    );
    Ok(RerunReport {
        out_dir: out_dir.to_path_buf(),
        mismatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_net(depth: usize) -> NetworkConfig {
        NetworkConfig::mlp(20, vec![20; depth], NonlinearitySpec::Relu)
    }

    #[test]
    fn spec_roundtrips_through_json() {
        for cmd in [
            Command::tail_sweep(small_net(2), 1000),
            Command::figure3_default(1000),
            Command::covariance_default(10_000),
            Command::envelope_default(),
            Command::contours_default(),
            Command::oracle_default(1000),
            Command::Penalty { network: small_net(2) },
        ] {
            let spec = RunSpec::new(cmd, 9);
            let json = serde_json::to_string(&spec).unwrap();
            assert!(json.contains(&format!("\"command\":\"{}\"", spec.command.name())));
            assert_eq!(serde_json::from_str::<RunSpec>(&json).unwrap(), spec);
        }
    }

    #[test]
    fn tail_sweep_emits_curves_summary_and_recursion() {
        let spec = RunSpec::new(Command::tail_sweep(small_net(2), 20_000), 1);
        let out = run(&spec).unwrap();
        let names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            ["moments_layer1.csv", "moments_layer2.csv", "tail_summary.csv", "recursion.csv"]
        );
        let summary = out.artifact("tail_summary.csv").unwrap().as_str();
        assert_eq!(summary.lines().count(), 1 + 2 * 2);
        assert_eq!(out.artifact("recursion.csv").unwrap().as_str().lines().count(), 1 + 2);
        assert_eq!(out.failures, 0);
        assert_eq!(run(&spec).unwrap(), out);
    }

    #[test]
    fn estimator_failures_are_recorded() {
        // Too few samples for the survival fit: recorded, not fatal.
        let spec = RunSpec::new(Command::tail_sweep(small_net(1), 500), 1);
        let out = run(&spec).unwrap();
        assert_eq!(out.failures, 1);
        assert!(out.artifact("tail_summary.csv").unwrap().as_str().contains("error:"));
    }

    #[test]
    fn identity_layer_is_gaussian() {
        let net = NetworkConfig::mlp(20, vec![5], NonlinearitySpec::Identity);
        let out = run(&RunSpec::new(Command::tail_sweep(net, 200_000), 4)).unwrap();
        let row = out.artifact("tail_summary.csv").unwrap().as_str().lines().nth(1).unwrap().to_string();
        let theta: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!((theta - 0.5).abs() < 0.15, "{row}");
    }

    #[test]
    fn bad_layers_are_rejected() {
        let mut cmd = Command::tail_sweep(small_net(2), 1000);
        if let Command::TailSweep { layers, .. } = &mut cmd {
            *layers = vec![3];
        }
        assert!(run(&RunSpec::new(cmd, 0)).is_err());
    }

    #[test]
    fn contours_and_envelope_have_no_violations() {
        let out = run(&RunSpec::new(Command::contours_default(), 0)).unwrap();
        assert_eq!(out.violations, 0);
        assert_eq!(out.artifacts.len(), 5);
        let env = run(&RunSpec::new(Command::envelope_default(), 0)).unwrap();
        assert_eq!(env.violations, 0);
        let text = env.artifact("envelope.csv").unwrap().as_str();
        assert_eq!(text.matches(",holds,").count(), 4);
        assert_eq!(text.matches(",bounded,").count(), 2);
    }

    #[test]
    fn standardize_divides_by_iqr() {
        let raw: Vec<f64> = (1..=101).map(|i| i as f64 - 51.0).collect();
        let set = UnitSampleSet::synthetic("ramp", &raw);
        let z = standardize_iqr(&set).unwrap();
        assert!((z[100] - 50.0 / 50.0).abs() < 1e-12);
        let big = set.scaled(1e300).unwrap().scaled(1e300).unwrap();
        let zb = standardize_iqr(&big).unwrap();
        assert!(zb.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn survival_curve_counts() {
        let c = SurvivalCurve::from_positive(1, vec![3.0, 1.0, 2.0, 4.0], &[0.0, 1.0, 2.5, 4.0]);
        assert_eq!(c.counts, vec![4, 3, 2, 0]);
        assert_eq!(c.quantile_index(0.5), Some(2));
    }

    #[test]
    fn ordering_check_on_constructed_curves() {
        let grid = [0.0, 1.0, 2.0];
        let light = SurvivalCurve { layer: 1, n_positive: 10_000, counts: vec![10_000, 5, 0] };
        let heavy = SurvivalCurve { layer: 2, n_positive: 10_000, counts: vec![10_000, 50, 8] };
        let ok = ordering_check(&[heavy.clone(), light.clone()], &grid);
        assert!(ok.pass);
        // The heavy curve's anchor is skipped: the light curve is empty there.
        assert_eq!(ok.points.len(), 1);
        let swapped = SurvivalCurve { layer: 3, ..light };
        assert!(!ordering_check(&[heavy, swapped], &grid).pass);
    }

    #[test]
    fn gaussian_reference_matches_exact_values() {
        assert!((gaussian_log_survival(0.0, 1.0)).abs() < 1e-15);
        // P(Z > 1.959964) = 0.025, doubled for the half-line.
        assert!((gaussian_log_survival(1.959964, 1.0) - 0.05f64.ln()).abs() < 1e-5);
        assert!((gaussian_iqr() - 1.3489795).abs() < 1e-6);
    }

    #[test]
    fn oracle_check_passes_small() {
        let out = run(&RunSpec::new(Command::oracle_default(200_000), 3)).unwrap();
        assert_eq!(out.artifact("oracle_check.csv").unwrap().as_str().lines().count(), 9);
        let out = run(&RunSpec::new(Command::OracleCheck { sigma: 1.0, k_max: 0, n_samples: 10 }, 3));
        assert!(out.is_err());
    }

    #[test]
    fn penalty_report() {
        let out = run(&RunSpec::new(Command::Penalty { network: small_net(3) }, 3)).unwrap();
        let text = out.artifact("penalty.txt").unwrap().as_str();
        assert!(text.contains("layer 3 q = 0.6666666666666666"));
        assert!(text.contains("copula_term = excluded"));
    }
}
