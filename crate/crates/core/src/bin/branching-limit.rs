use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use branching_limit::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    version,
    about = "Branching chains with immigration and their continuous-state limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a discrete branching chain with immigration.
    SimulateDbi(Common),
    /// Solve the psi-flow and tabulate Laplace exponents.
    SolvePsi(Common),
    /// Build chains whose scaled functionals equal (R, F) and check the identity.
    Embed(Common),
    /// Monte Carlo check of the scaling limit through Laplace functionals.
    VerifyLimit(Common),
    /// Tabulate S_k and the drift functional against their limits.
    Lemma22(Common),
    /// Compare discrete and continuous generators on exponentials.
    GeneratorTable(Common),
    /// Downcrossing chains of drifted Brownian motion against their limits.
    Rayknight(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output directory for CSV tables and summary.txt.
    #[arg(long)]
    out: PathBuf,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::SimulateDbi(c) => ("dbi-simulate", c),
            Command::SolvePsi(c) => ("psi-solve", c),
            Command::Embed(c) => ("embed", c),
            Command::VerifyLimit(c) => ("limit-verify", c),
            Command::Lemma22(c) => ("lemma22-table", c),
            Command::GeneratorTable(c) => ("generator-table", c),
            Command::Rayknight(c) => ("rayknight-verify", c),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.parts();
    let cfg = match ExperimentConfig::load(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if cfg.experiment.kind() != kind {
        eprintln!(
            "error: config describes a {} experiment, not {kind}",
            cfg.experiment.kind()
        );
        return ExitCode::from(2);
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    match harness::run_to_dir(&cfg, seed, args.threads, &args.out) {
        Ok(report) => {
            print!("{}", report.summary(None));
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
