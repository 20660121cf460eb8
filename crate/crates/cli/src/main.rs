use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use quasistatic::acceptance::{acceptance_suite, Tier};
use quasistatic::harness::{run_experiment, run_sweep, ExperimentConfig, ModelKind};
use quasistatic::Error;

#[derive(Parser)]
#[command(name = "quasistatic", version, about = "Quasi-static boundary-driven particle system experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exclusion process with time-dependent reservoirs
    Ssep(RunArgs),
    /// Zero-range process
    Zr(RunArgs),
    /// Thermostatted anharmonic chain
    Chain(RunArgs),
    /// Dual random-walk estimators
    Dual(RunArgs),
    /// Exact moment equations
    Oracle(RunArgs),
    /// Equilibrium thermodynamics tables
    Thermo(RunArgs),
    /// Sweep over N and alpha with a convergence table
    Sweep(RunArgs),
    /// Acceptance criteria
    Accept(AcceptArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Overrides `master_seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `replicas`
    #[arg(long)]
    replicas: Option<u64>,
    /// Overrides `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Fast,
    Full,
}

#[derive(Args)]
struct AcceptArgs {
    #[arg(long, value_enum, default_value_t = TierArg::Fast)]
    tier: TierArg,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
    /// Directory for report.json
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(args: &RunArgs) -> quasistatic::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = args.replicas {
        cfg.replicas = r;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn expect_model(cfg: &ExperimentConfig, want: ModelKind) -> quasistatic::Result<()> {
    if cfg.model != want {
        return Err(Error::Config(format!(
            "configuration selects model `{}` but the `{}` subcommand was used",
            cfg.model.name(),
            want.name()
        )));
    }
    Ok(())
}

fn run_model(args: &RunArgs, want: ModelKind) -> quasistatic::Result<()> {
    let cfg = load(args)?;
    expect_model(&cfg, want)?;
    let summary = run_experiment(&cfg)?;
    println!("{} -> {}", cfg.model.name(), cfg.output_dir.display());
    for s in &summary.stats {
        match (s.reference_value, s.provenance) {
            (Some(r), Some(p)) => println!(
                "  {:<40} {:>14.6e} ± {:<10.3e} ref {:>14.6e} ({})",
                s.statistic,
                s.value,
                s.stderr,
                r,
                p.as_str()
            ),
            _ => println!("  {:<40} {:>14.6e} ± {:<10.3e}", s.statistic, s.value, s.stderr),
        }
    }
    Ok(())
}

fn run_sweep_cmd(args: &RunArgs) -> quasistatic::Result<()> {
    let cfg = load(args)?;
    let table = run_sweep(&cfg)?;
    println!("sweep ({}) -> {}", cfg.model.name(), cfg.output_dir.display());
    for r in &table.fitted_rates {
        match r.rate {
            Some(rate) => println!("  {:<40} alpha={:<6} rate {:.3}", r.statistic_name, r.alpha, rate),
            None => println!("  {:<40} alpha={:<6} rate n/a", r.statistic_name, r.alpha),
        }
    }
    Ok(())
}

fn run_accept(args: &AcceptArgs) -> anyhow::Result<bool> {
    let tier = match args.tier {
        TierArg::Fast => Tier::Fast,
        TierArg::Full => Tier::Full,
    };
    let report = acceptance_suite(tier, args.seed, |c| println!("{c}"));
    println!("{}", if report.all_passed() { "ALL PASSED" } else { "FAILURES" });
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(dir.join("report.json"), text + "\n")?;
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ssep(a) => run_model(a, ModelKind::Ssep),
        Command::Zr(a) => run_model(a, ModelKind::ZeroRange),
        Command::Chain(a) => run_model(a, ModelKind::Chain),
        Command::Dual(a) => run_model(a, ModelKind::Dual),
        Command::Oracle(a) => run_model(a, ModelKind::Oracle),
        Command::Thermo(a) => run_model(a, ModelKind::Thermo),
        Command::Sweep(a) => run_sweep_cmd(a),
        Command::Accept(a) => {
            return match run_accept(a) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::FAILURE,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter { .. } | Error::Profile(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
