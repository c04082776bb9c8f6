//! `hsstv`: simulate observations, fuse them, score the result, self-check.
//!
//! Exit codes: 0 success, 1 failed property or divergence, 2 usage or I/O error.

mod commands;
mod config;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{EvaluateInputs, FuseInputs, PropertyFailure};
use config::{ExperimentConfig, GammaArg, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "hsstv",
    version,
    about = "Hyperspectral image fusion with HSSTV"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML experiment config; manifests written by earlier runs are accepted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Named parameter set, e.g. pan-r2 or fuse-r4-s0.1-p1.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `auto`, or an explicit pair `g1,g2`.
    #[arg(long, global = true, value_name = "auto|G1,G2")]
    gamma: Option<GammaArg>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Degrade a reference cube into v.hsc, g.hsc and meta.toml.
    Simulate {
        #[arg(long, value_name = "PATH", conflicts_with = "synthetic")]
        truth: Option<PathBuf>,
        /// Generate the reference instead, e.g. blocks:32x32x16.
        #[arg(long, value_name = "SPEC")]
        synthetic: Option<String>,
    },
    /// Estimate the high-resolution cube; writes u.hsc, q.hsc, trace.csv, manifest.toml.
    Fuse {
        /// Directory holding v.hsc, g.hsc and meta.toml from `simulate`.
        #[arg(long, value_name = "DIR")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        v: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        g: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        meta: Option<PathBuf>,
    },
    /// Score an estimate against the reference; writes metrics.csv.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        estimate: PathBuf,
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Ratio used by ERGAS; defaults to degradation.ratio.
        #[arg(long)]
        ratio: Option<usize>,
        /// Also write per_band.csv.
        #[arg(long)]
        per_band: bool,
    },
    /// Run the operator and proximal self-test battery.
    Check {
        #[arg(long, hide = true, value_name = "OPERATOR")]
        perturb_adjoint: Option<String>,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("HSSTV_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("HSSTV_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let g = cli.global;
    if let Command::Check { perturb_adjoint } = cli.command {
        return commands::check(g.seed.unwrap_or(0), perturb_adjoint);
    }
    let overrides = Overrides {
        preset: g.preset,
        seed: g.seed,
        out: g.out,
        gamma: g.gamma,
    };
    let mut cfg = ExperimentConfig::resolve(g.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Simulate { truth, synthetic } => {
            if truth.is_some() {
                cfg.paths.truth = truth;
                cfg.synthetic = None;
            }
            if synthetic.is_some() {
                cfg.synthetic = synthetic;
            }
            commands::simulate(cfg)
        }
        Command::Fuse { input, v, g, meta } => {
            commands::fuse(cfg, FuseInputs { input, v, g, meta })
        }
        Command::Evaluate {
            estimate,
            truth,
            ratio,
            per_band,
        } => commands::evaluate_cmd(
            cfg,
            EvaluateInputs {
                estimate,
                truth,
                ratio,
                per_band,
            },
        ),
        Command::Check { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<PropertyFailure>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
