//! Acceptance run: every criterion at full size, one result line each.
//! Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use bnn_tails::covariance::{power_grid, sweep, CovarianceVerdict};
use bnn_tails::experiment::{execute, gaussian_samples, rerun, run, Command, RunSpec, MANIFEST_FILE};
use bnn_tails::nonlinearity::{search_envelope_constants, EnvelopeGrid, EnvelopeSearch};
use bnn_tails::penalty::{contour, equal_coordinate_point, layer_exponent};
use bnn_tails::pooling::{pooled_tail_check, PoolingKind, PoolingSpec};
use bnn_tails::rng::{stream, Domain};
use bnn_tails::tail::{
    empirical_log_norm, estimate_theta_moments, estimate_theta_survival, gaussian_norm_oracle,
    ks_gaussian_test, moment_curve, recursion_check, Estimator, MomentCurve, MomentEntry,
    TailEstimate,
};
use bnn_tails::{sample_input, sample_units, NetworkConfig, NonlinearitySpec, Sampler, UnitKind, UnitRef, UnitSampleSet};
use rand::Rng;
use rand_distr::{Exp1, Weibull};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn criterion_net() -> NetworkConfig {
    NetworkConfig::mlp(100, vec![100, 100, 100], NonlinearitySpec::Relu)
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

fn base_step() -> Outcome {
    let cfg = NetworkConfig::mlp(100, vec![100], NonlinearitySpec::Relu);
    let x = sample_input(100, SEED).unwrap();
    let norm2: f64 = x.iter().map(|v| v * v).sum();
    let set = sample_units(&cfg, &x, 1, 0, UnitKind::Pre, 100_000, SEED).unwrap();
    let ks = ks_gaussian_test(&set, norm2.sqrt()).unwrap();
    let v = set.decoded();
    let var = v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64;
    let ratio = var / norm2;
    outcome(
        ks.p_value > 0.01 && (ratio - 1.0).abs() <= 0.02,
        format!("KS p = {:.3}, variance / |x|^2 = {ratio:.4}", ks.p_value),
    )
}

struct ShallowRun {
    moment: Vec<TailEstimate>,
    survival: Vec<TailEstimate>,
}

fn shallow_run() -> ShallowRun {
    let cfg = criterion_net();
    let x = sample_input(100, SEED).unwrap();
    let targets: Vec<UnitRef> = (1..=3).map(|l| UnitRef::new(l, 0, UnitKind::Pre)).collect();
    let joint = Sampler::new(&cfg, &x).unwrap().joint(&targets, 1_000_000, SEED).unwrap();
    let sets: Vec<UnitSampleSet> = (0..3).map(|i| joint.unit_set(i)).collect();
    ShallowRun {
        moment: sets
            .iter()
            .map(|s| estimate_theta_moments(&moment_curve(s, 2, 10).unwrap()).unwrap())
            .collect(),
        survival: sets
            .iter()
            .map(|s| estimate_theta_survival(s, 0.1).unwrap())
            .collect(),
    }
}

fn shallow_theta(run: &ShallowRun) -> Outcome {
    let ranges = [(0.4, 0.6), (0.85, 1.15), (1.3, 1.7)];
    let in_range = run
        .moment
        .iter()
        .zip(ranges)
        .all(|(e, (lo, hi))| within(e.theta_hat, lo, hi));
    let verdicts: Vec<bool> = run
        .moment
        .windows(2)
        .map(|w| recursion_check(&w[0], &w[1]).unwrap().pass)
        .collect();
    let thetas: Vec<String> = run.moment.iter().map(|e| format!("{:.3}", e.theta_hat)).collect();
    outcome(
        in_range && verdicts.iter().all(|&v| v),
        format!("theta = ({}), recursion checks {:?}", thetas.join(", "), verdicts),
    )
}

fn cross_check(run: &ShallowRun) -> Outcome {
    let gaps: Vec<f64> = (0..2)
        .map(|i| (run.survival[i].theta_hat - run.moment[i].theta_hat).abs())
        .collect();
    outcome(
        gaps.iter().all(|&g| g <= 0.2),
        format!(
            "survival ({:.3}, {:.3}) vs moment ({:.3}, {:.3}), gaps ({:.3}, {:.3})",
            run.survival[0].theta_hat,
            run.survival[1].theta_hat,
            run.moment[0].theta_hat,
            run.moment[1].theta_hat,
            gaps[0],
            gaps[1]
        ),
    )
}

fn gaussian_oracle() -> Outcome {
    let set = UnitSampleSet::synthetic("gaussian", &gaussian_samples(1.0, 1_000_000, SEED));
    let worst = (1..=8)
        .map(|k| {
            let emp = empirical_log_norm(&set, k).unwrap().0.exp();
            let exact = gaussian_norm_oracle(1.0, k).unwrap();
            (emp - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    outcome(worst <= 0.02, format!("max relative error {worst:.2e} over k = 1..8"))
}

fn synthetic_calibration() -> Outcome {
    let n = 1_000_000;
    let mut rng = stream(SEED, Domain::Synthetic, 1);
    let exp: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
    let weibull_law = Weibull::new(1.0, 2.0).unwrap();
    let mut rng = stream(SEED, Domain::Synthetic, 2);
    let weibull: Vec<f64> = (0..n).map(|_| rng.sample(weibull_law)).collect();
    let exp_set = UnitSampleSet::synthetic("exp", &exp);
    let wb_set = UnitSampleSet::synthetic("weibull2", &weibull);
    let exp_s = estimate_theta_survival(&exp_set, 0.1).unwrap().theta_hat;
    let wb_s = estimate_theta_survival(&wb_set, 0.1).unwrap().theta_hat;
    let exp_m = Estimator::default().estimate(&exp_set).unwrap().theta_hat;
    let wb_m = Estimator::default().estimate(&wb_set).unwrap().theta_hat;

    let entries = (2..=10)
        .map(|k| MomentEntry {
            k,
            log_norm: 0.5 * f64::from(k).ln() + 0.3,
            se: 0.0,
        })
        .collect();
    let curve = MomentCurve::new(entries, 1, "noiseless").unwrap();
    let exact = estimate_theta_moments(&curve).unwrap().theta_hat;
    outcome(
        (exp_s - 1.0).abs() <= 0.15 && (wb_s - 0.5).abs() <= 0.1 && (exact - 0.5).abs() <= 1e-12,
        format!(
            "survival-slope: exp {exp_s:.3}, weibull(2) {wb_s:.3}; moment-slope: exp {exp_m:.3}, weibull(2) {wb_m:.3}; noiseless {exact}"
        ),
    )
}

fn envelope() -> Outcome {
    let grid = EnvelopeGrid::default();
    let holds: Vec<bool> = [
        NonlinearitySpec::Relu,
        NonlinearitySpec::Prelu { alpha: 0.1 },
        NonlinearitySpec::Elu { alpha: 1.0 },
        NonlinearitySpec::SELU,
    ]
    .iter()
    .map(|s| search_envelope_constants(s, &grid).unwrap().is_certified())
    .collect();
    let bounded: Vec<bool> = [NonlinearitySpec::Tanh, NonlinearitySpec::Sigmoid]
        .iter()
        .map(|s| matches!(search_envelope_constants(s, &grid).unwrap(), EnvelopeSearch::Bounded { .. }))
        .collect();
    outcome(
        holds.iter().chain(&bounded).all(|&b| b),
        format!("holds {holds:?}, bounded {bounded:?}"),
    )
}

fn covariance() -> Outcome {
    let cfg = criterion_net();
    let x = sample_input(100, SEED).unwrap();
    let sw = sweep(&cfg, &x, &[1, 2, 3], &power_grid(3), (0, 1), 1_000_000, SEED);
    let violations = sw.count(CovarianceVerdict::Violation);
    let layer1_zero = sw
        .reports
        .iter()
        .filter(|r| r.layer == 1)
        .all(|r| r.verdict == CovarianceVerdict::ZeroConsistent);
    outcome(
        violations == 0 && layer1_zero && sw.reports.len() == 27,
        format!(
            "{} cells, {} violations, {} nonnegative, {} zero, layer 1 all zero: {layer1_zero}, failed cells {}",
            sw.reports.len(),
            violations,
            sw.count(CovarianceVerdict::NonnegativeConsistent),
            sw.count(CovarianceVerdict::ZeroConsistent),
            sw.failures.len()
        ),
    )
}

fn pooling() -> Outcome {
    let cfg = criterion_net();
    let x = sample_input(100, SEED).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [PoolingKind::Max, PoolingKind::Average] {
        let spec = PoolingSpec::new(kind, 4).unwrap();
        let c = pooled_tail_check(
            &cfg,
            &x,
            2,
            &[0, 1, 2, 3],
            &spec,
            UnitKind::Post,
            &Estimator::default(),
            1_000_000,
            SEED,
        )
        .unwrap();
        pass &= c.pass;
        parts.push(format!(
            "{kind}: {:.3} -> {:.3} (tolerance {:.3})",
            c.before.theta_hat, c.after.theta_hat, c.tolerance
        ));
    }
    outcome(pass, parts.join(", "))
}

fn figure3() -> Outcome {
    let out = run(&RunSpec::new(Command::figure3_default(100_000), SEED)).unwrap();
    outcome(out.violations == 0, out.summary.join("; "))
}

fn contours() -> Outcome {
    let qs = [2.0, 1.0, 2.0 / 3.0, 0.2];
    let worst = qs
        .iter()
        .map(|&q| contour(q, 1.0, 720).unwrap().max_relative_error())
        .fold(0.0, f64::max);
    let layers_match = [1, 2, 3, 10]
        .iter()
        .zip(qs)
        .all(|(&l, q)| (layer_exponent(l) - q).abs() < 1e-15);
    let pts: Vec<f64> = (1..=10).map(|l| equal_coordinate_point(layer_exponent(l), 1.0)).collect();
    let shrinking = pts.windows(2).all(|w| w[1] < w[0]);
    outcome(
        worst <= 1e-9 && layers_match && shrinking,
        format!("max ball-equation error {worst:.1e}, equal-coordinate point shrinking: {shrinking}"),
    )
}

fn determinism() -> Outcome {
    let small = NetworkConfig::mlp(30, vec![30, 30, 30], NonlinearitySpec::Relu);
    let specs = [
        Command::tail_sweep(small.clone(), 20_000),
        match Command::figure3_default(20_000) {
            Command::Figure3 { network, .. } => Command::Figure3 {
                network,
                layers: vec![1, 2, 3, 10],
                n_samples: 20_000,
                standardize: true,
                grid_points: 200,
            },
            other => other,
        },
        Command::Covariance {
            network: small.clone(),
            layers: vec![1, 2],
            max_power: 2,
            pair: (0, 1),
            n_samples: 20_000,
        },
        Command::envelope_default(),
        Command::contours_default(),
        Command::oracle_default(20_000),
        Command::Penalty { network: small },
    ];
    let base = std::env::temp_dir().join(format!("bnn-tails-acceptance-{}", std::process::id()));
    let mut bad = Vec::new();
    for cmd in specs {
        let name = cmd.name();
        let spec = RunSpec::new(cmd, SEED);
        let first = base.join(name).join("first");
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        one.install(|| execute(&spec, &first)).unwrap();
        for threads in [2, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let again = base.join(name).join(format!("t{threads}"));
            let report = pool
                .install(|| rerun(&first.join(MANIFEST_FILE), &again))
                .unwrap();
            if !report.identical() {
                bad.push(format!("{name} with {threads} threads: {:?}", report.mismatched));
            }
        }
    }
    let _ = std::fs::remove_dir_all(&base);
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "7 commands replayed with 1, 2 and 4 threads, all CSVs identical".to_string()
        } else {
            bad.join("; ")
        },
    )
}

fn report(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let on_time = elapsed <= budget;
    let pass = o.pass && on_time;
    println!(
        "[{}] criterion {id:>2} {name}: {} ({:.1}s of {}s){}",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if on_time { "" } else { " over time budget" }
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    results.push(report(1, "base-step Gaussianity", secs(10), base_step));

    let mut shallow = None;
    results.push(report(2, "theta = l/2 at shallow depth", secs(300), || {
        let r = shallow_run();
        let o = shallow_theta(&r);
        shallow = Some(r);
        o
    }));
    let shallow = shallow.expect("criterion 2 ran");
    results.push(report(3, "estimator cross-check", secs(300), || cross_check(&shallow)));

    results.push(report(4, "Gaussian moment oracle", secs(30), gaussian_oracle));
    results.push(report(5, "synthetic calibration", secs(120), synthetic_calibration));
    results.push(report(6, "envelope certification", secs(1), envelope));
    results.push(report(7, "covariance sweep", secs(600), covariance));
    results.push(report(8, "pooling invariance", secs(300), pooling));
    results.push(report(9, "layer survival curves", secs(300), figure3));
    results.push(report(10, "penalty contours", secs(60), contours));
    results.push(report(11, "manifest determinism", secs(300), determinism));

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
