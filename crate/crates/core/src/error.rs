use thiserror::Error;

use crate::dbi::DbiPath;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid probability generating function: {0}")]
    InvalidPgf(String),

    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),

    #[error("iteration cap of {cap} evaluations exceeded")]
    IterationCap { cap: u64 },

    #[error("population cap {cap} exceeded at step {step}")]
    PopulationCap {
        cap: u64,
        step: usize,
        /// The path up to (excluding) the step that overflowed.
        truncated: Box<DbiPath>,
    },

    #[error("ODE step size underflow at t = {t} (h = {h})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("ODE solver exceeded {max_steps} steps")]
    TooManySteps { max_steps: usize },

    #[error("mechanism is not conservative: {0}")]
    NotConservative(String),

    #[error("embedding infeasible at k = {k}: {reason}{}", min_k.map(|m| format!(" (needs k >= {m:.4})")).unwrap_or_default())]
    InfeasibleAtThisK { k: u64, min_k: Option<f64>, reason: String },

    #[error("unsupported mechanism: {0}")]
    UnsupportedMechanism(&'static str),

    #[error("time cap {cap} reached before the local-time budget was spent on {censored} of {paths} paths")]
    TimeCap { cap: f64, censored: usize, paths: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain { what, value, domain }
}
