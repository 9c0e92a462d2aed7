//! Experiment driver behind the command-line tool.
//!
//! [`run`] executes one configured campaign on a worker pool of the given
//! size and returns a [`Report`]; every random quantity comes from the seed
//! through fixed substreams, so the report does not depend on the pool size.

pub mod campaigns;
pub mod config;
pub mod report;

use std::path::Path;
use std::time::Instant;

pub use config::{Experiment, ExperimentConfig};
pub use report::{Assertion, Report, Table};

use crate::error::{Error, Result};

/// Runs the experiment in `cfg` with `threads` workers.
pub fn run(cfg: &ExperimentConfig, seed: u64, threads: usize) -> Result<Report> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    pool.install(|| match &cfg.experiment {
        Experiment::DbiSimulate(s) => campaigns::run_dbi_simulation(cfg, s, seed),
        Experiment::PsiSolve(s) => campaigns::run_psi_solve(cfg, s, seed),
        Experiment::Embed(s) => campaigns::run_embed(cfg, s, seed),
        Experiment::LimitVerify(s) => campaigns::run_limit_verification(cfg, s, seed),
        Experiment::Lemma22Table(s) => campaigns::run_lemma22_table(cfg, s, seed),
        Experiment::GeneratorTable(s) => campaigns::run_generator_table(cfg, s, seed),
        Experiment::RayknightVerify(s) => campaigns::run_rayknight_verification(cfg, s, seed),
    })
}

/// Runs and writes the report into `out`. Returns the report.
pub fn run_to_dir(cfg: &ExperimentConfig, seed: u64, threads: usize, out: &Path) -> Result<Report> {
    let start = Instant::now();
    let report = run(cfg, seed, threads)?;
    report.write(out, start.elapsed().as_secs_f64())?;
    Ok(report)
}
