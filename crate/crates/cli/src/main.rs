//! `ddlab`: config-driven risk-curve sweeps, closed-form theory tables, and
//! oracle verification for dropout-regularized regression.

mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ddlab_core::harness::{run_sweep, SweepConfig, SweepKind};
use ddlab_core::report::{to_csv, to_json};
use ddlab_core::risk_theory::{
    asymptotic_optimal, ridge_optimal_lambda, spectral_optimal, Regime,
};
use ddlab_core::verify::run_verify;

#[derive(Parser)]
#[command(
    name = "ddlab",
    version,
    about = "Dropout regression risk laboratory: Monte Carlo sweeps with closed-form overlays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-size sweep (risk vs n).
    SweepSamples(SweepArgs),
    /// Model-size sweep (risk vs k under random projection).
    SweepModel(SweepArgs),
    /// Random-feature sweep (held-out MSE vs n or feature count).
    SweepFeatures(SweepArgs),
    /// Largest correlation eigenvalue vs the Marchenko-Pastur edge.
    Spectrum(SweepArgs),
    /// Closed-form optimal rates and risks (no simulation).
    Theory(TheoryArgs),
    /// Run the closed-form-vs-Monte-Carlo oracle checks.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config file (strict schema).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (DDLAB_THREADS as fallback); never changes results.
    #[arg(long)]
    threads: Option<usize>,
    /// Config overrides, e.g. --set gamma_policy=fixed:0.8
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 1.0)]
    b2: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run only the named check.
    #[arg(long)]
    only: Option<String>,
}

fn env_threads() -> Option<usize> {
    std::env::var("DDLAB_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn run_sweep_command(kind: SweepKind, args: &SweepArgs) -> Result<()> {
    let mut cfg: SweepConfig = config::parse_config(&args.config, &args.set, kind)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(threads) = args.threads.or_else(env_threads) {
        cfg.threads = Some(threads);
    }
    let output = run_sweep(&cfg)?;
    let rendered = match args.format {
        Format::Csv => to_csv(&output),
        Format::Json => to_json(&output),
    };
    match &args.out {
        Some(path) => std::fs::write(path, rendered)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

fn run_theory(args: &TheoryArgs) -> Result<()> {
    let c = args.p as f64 / args.n as f64;
    println!(
        "n = {}  p = {}  sigma2 = {}  b2 = {}  c = p/n = {c}",
        args.n, args.p, args.sigma2, args.b2
    );
    match spectral_optimal(args.n, args.p, args.sigma2, args.b2) {
        Ok((gamma, risk)) => {
            let regime = match risk.regime {
                Regime::Underparam => "underparam (n < p-1)",
                Regime::Overparam => "overparam (n > p+1)",
                Regime::Threshold => unreachable!(),
            };
            println!("regime                : {regime}");
            println!("gamma_opt             : {gamma:.6}");
            println!(
                "lambda_opt            : {}",
                ridge_optimal_lambda(args.p, args.sigma2, args.b2)?
            );
            println!("optimal excess risk   : {:.6}", risk.excess.unwrap());
            println!("optimal total risk    : {:.6}", risk.total.unwrap());
        }
        Err(ddlab_core::Error::ThresholdRegime(_)) => {
            println!("regime                : threshold (p-1 <= n <= p+1)");
            println!("gamma_opt             : undefined at interpolation threshold");
            println!("optimal risk          : undefined at interpolation threshold");
        }
        Err(e) => return Err(e.into()),
    }
    let (gamma_hat, risk_hat) = asymptotic_optimal(c, args.sigma2, args.b2)?;
    println!("asymptotic gamma_hat  : {gamma_hat:.6}");
    println!("asymptotic opt risk   : {risk_hat:.6}");
    Ok(())
}

fn run_verify_command(args: &VerifyArgs) -> Result<i32> {
    let (results, all_pass) = run_verify(args.only.as_deref())?;
    for r in &results {
        println!(
            "[{}] {:<22} observed {:.6e}  expected {:.6e}  tol {:.1e}  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.observed,
            r.expected,
            r.tolerance,
            r.detail
        );
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SweepSamples(a) => run_sweep_command(SweepKind::Samples, a).map(|()| 0),
        Command::SweepModel(a) => run_sweep_command(SweepKind::Model, a).map(|()| 0),
        Command::SweepFeatures(a) => run_sweep_command(SweepKind::Features, a).map(|()| 0),
        Command::Spectrum(a) => run_sweep_command(SweepKind::Spectrum, a).map(|()| 0),
        Command::Theory(a) => run_theory(a).map(|()| 0),
        Command::Verify(a) => run_verify_command(a),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
