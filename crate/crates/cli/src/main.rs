use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conelab_cli::{run_experiment, CliError, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "conelab",
    version,
    about = "Harmonic maps on cones: solvers and inequality checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a Dirichlet problem.
    Solve(RunArgs),
    /// Sweep random quadruples through the comparison inequality.
    NpcCheck(RunArgs),
    /// Compare approximate and graph energy densities under refinement.
    EnergyConvergence(RunArgs),
    /// Product, mean-value and Hölder checks on solved maps.
    Regularity(RunArgs),
    /// Lipschitz-to-energy ratios at cone points of several angles.
    Sharpness(RunArgs),
    /// Inf-convolution bounds and super-solution checks.
    HopfLax(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(kind),
    };
    cfg.resolve_kind(Some(kind))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let summary = run_experiment(&cfg, &args.out)?;
    for c in &summary.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {}: {} = {:e} (tolerance {:e})",
            c.name, c.statistic, c.value, c.tolerance
        );
    }
    let failures = summary.failures();
    if failures.is_empty() {
        Ok(())
    } else {
        for c in &failures {
            eprintln!("violated: {}", c.anchor);
        }
        Err(CliError::Assertion(failures.len()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Solve(a) => (ExperimentKind::Solve, a),
        Command::NpcCheck(a) => (ExperimentKind::NpcCheck, a),
        Command::EnergyConvergence(a) => (ExperimentKind::EnergyConvergence, a),
        Command::Regularity(a) => (ExperimentKind::Regularity, a),
        Command::Sharpness(a) => (ExperimentKind::Sharpness, a),
        Command::HopfLax(a) => (ExperimentKind::HopfLax, a),
    };
    match run(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("conelab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
