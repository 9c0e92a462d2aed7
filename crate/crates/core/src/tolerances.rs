//! Numerical tolerances and resource caps, kept in one place.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// PGF weights must sum to one within this.
    pub pgf_normalization: f64,
    /// Total PGF evaluations allowed in a single functional iteration.
    pub iteration_cap: u64,
    /// Largest population a simulated chain may reach.
    pub population_cap: u64,
    /// Local error target of the psi-flow solver.
    pub ode: f64,
    /// Critical value of the Monte Carlo band.
    pub z_crit: f64,
    /// Absolute slack for finite-k bias on top of the Monte Carlo band.
    pub abs_tol: f64,
    /// Embedding identity tolerance (relative to max(1, |R|)).
    pub embedding: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pgf_normalization: 1e-12,
            iteration_cap: 10_000_000,
            population_cap: 1_000_000_000,
            ode: 1e-10,
            z_crit: 3.0,
            abs_tol: 0.01,
            embedding: 1e-10,
        }
    }
}
