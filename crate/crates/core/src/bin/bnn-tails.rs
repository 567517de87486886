use std::path::PathBuf;
use std::process::ExitCode;

use bnn_tails::experiment::{execute, rerun, Command, RunSpec, MANIFEST_FILE};
use bnn_tails::nonlinearity::NonlinearitySpec;
use bnn_tails::{NetworkConfig, UnitKind};
use clap::{ArgAction, Args, Parser, Subcommand};

/// Sampling experiments on the tails of Bayesian neural network units.
#[derive(Parser)]
#[command(name = "bnn-tails", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tail parameter estimates for one unit per layer.
    TailSweep(Opts),
    /// Log-survival curves of pre-nonlinearities on a common grid.
    Figure3(Opts),
    /// Covariances of unit powers within each layer.
    Covariance(Opts),
    /// Linear envelope certification for the built-in activations.
    Envelope(Opts),
    /// L^(2/l) ball contours for the requested layers.
    Contours(Opts),
    /// Gaussian sample norms against the closed form.
    OracleCheck(Opts),
    /// Layer-wise unit penalties and weight decay for one prior draw.
    Penalty(Opts),
    /// Re-run the command recorded in a manifest and compare file hashes.
    Rerun {
        /// Path to a manifest.json, or the directory holding it.
        manifest: PathBuf,
        #[arg(long, default_value = "rerun")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Opts {
    /// Network description (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated layer list, e.g. 1,2,3.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long, default_value = "pre")]
    kind: UnitKind,
    #[arg(long)]
    k_min: Option<u32>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    tail_fraction: Option<f64>,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    standardize: bool,
    /// Exit with status 3 if any check comes out negative.
    #[arg(long = "assert")]
    assert_checks: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Opts {
    fn network(&self, fallback: NetworkConfig) -> bnn_tails::Result<NetworkConfig> {
        match &self.config {
            Some(path) => NetworkConfig::load(path),
            None => Ok(fallback),
        }
    }
}

fn build(cmd: &Cmd, o: &Opts) -> bnn_tails::Result<RunSpec> {
    let relu = |depth| NetworkConfig::mlp(100, vec![100; depth], NonlinearitySpec::Relu);
    let mut command = match cmd {
        Cmd::TailSweep(_) => Command::tail_sweep(o.network(relu(3))?, 1_000_000),
        Cmd::Figure3(_) => match Command::figure3_default(100_000) {
            Command::Figure3 { layers, n_samples, grid_points, .. } => {
                let network = o.network(relu(10))?;
                let layers = layers.into_iter().filter(|&l| l <= network.depth()).collect();
                Command::Figure3 { network, layers, n_samples, standardize: o.standardize, grid_points }
            }
            _ => unreachable!(),
        },
        Cmd::Covariance(_) => match Command::covariance_default(1_000_000) {
            Command::Covariance { layers, max_power, pair, n_samples, .. } => Command::Covariance {
                network: o.network(relu(3))?,
                layers,
                max_power,
                pair,
                n_samples,
            },
            _ => unreachable!(),
        },
        Cmd::Envelope(_) => Command::envelope_default(),
        Cmd::Contours(_) => Command::contours_default(),
        Cmd::OracleCheck(_) => Command::oracle_default(1_000_000),
        Cmd::Penalty(_) => Command::Penalty { network: o.network(relu(3))? },
        Cmd::Rerun { .. } => unreachable!(),
    };
    match &mut command {
        Command::TailSweep { layers, kind, n_samples, k_min, k_max, tail_fraction, .. } => {
            override_layers(layers, &o.layers);
            *kind = o.kind;
            set(n_samples, o.samples);
            set(k_min, o.k_min);
            set(k_max, o.k_max);
            set(tail_fraction, o.tail_fraction);
        }
        Command::Figure3 { layers, n_samples, .. } | Command::Covariance { layers, n_samples, .. } => {
            override_layers(layers, &o.layers);
            set(n_samples, o.samples);
        }
        Command::Contours { layers, .. } => override_layers(layers, &o.layers),
        Command::OracleCheck { k_max, n_samples, .. } => {
            set(k_max, o.k_max);
            set(n_samples, o.samples);
        }
        Command::Envelope { .. } | Command::Penalty { .. } => {}
    }
    let seed = o.seed.or_else(|| {
        o.config.as_ref()?;
        match &command {
            Command::TailSweep { network, .. }
            | Command::Figure3 { network, .. }
            | Command::Covariance { network, .. }
            | Command::Penalty { network } => Some(network.seed),
            _ => None,
        }
    });
    Ok(RunSpec::new(command, seed.unwrap_or(0)))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn override_layers(slot: &mut Vec<usize>, v: &Option<Vec<usize>>) {
    if let Some(v) = v {
        *slot = v.clone();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Cmd::Rerun { manifest, out } = &cli.command {
        let path = if manifest.is_dir() { manifest.join(MANIFEST_FILE) } else { manifest.clone() };
        return match rerun(&path, out) {
            Ok(r) if r.identical() => {
                println!("all files identical; written to {}", r.out_dir.display());
                ExitCode::SUCCESS
            }
            Ok(r) => {
                eprintln!("files differ: {}", r.mismatched.join(", "));
                ExitCode::from(4)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }
    let opts = match &cli.command {
        Cmd::TailSweep(o)
        | Cmd::Figure3(o)
        | Cmd::Covariance(o)
        | Cmd::Envelope(o)
        | Cmd::Contours(o)
        | Cmd::OracleCheck(o)
        | Cmd::Penalty(o) => o,
        Cmd::Rerun { .. } => unreachable!(),
    };
    let result = build(&cli.command, opts).and_then(|spec| execute(&spec, &opts.out));
    match result {
        Ok((out, manifest)) => {
            for line in &out.summary {
                println!("{line}");
            }
            println!(
                "{}: {} files in {} ({:.2}s)",
                manifest.command,
                manifest.artifacts.len(),
                opts.out.display(),
                manifest.duration_secs
            );
            if opts.assert_checks && out.violations > 0 {
                eprintln!("{} check(s) failed", out.violations);
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
