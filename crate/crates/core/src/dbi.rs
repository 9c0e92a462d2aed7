//! Discrete Galton-Watson branching chains with immigration.
//!
//! One step from state `i` has generating function `g(z)^i h(z)`: every
//! individual is replaced by an independent offspring count drawn from `g`
//! and one immigration batch drawn from `h` is added.

use std::io::Write;

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::pgf::Pgf;
use crate::rng::RngSeed;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct DbiProcess<T> {
    pub offspring: Pgf<T>,
    pub immigration: Pgf<T>,
}

impl<T: Real> DbiProcess<T> {
    pub fn new(offspring: Pgf<T>, immigration: Pgf<T>) -> Self {
        Self { offspring, immigration }
    }

    /// A chain without immigration (`h ≡ 1`).
    pub fn without_immigration(offspring: Pgf<T>) -> Self {
        Self::new(offspring, Pgf::point_mass(0))
    }

    /// `Σ_j P(i, j) z^j = g(z)^i h(z)`.
    pub fn transition_pgf(&self, i: u64, z: T) -> Result<T> {
        if !(z >= T::zero() && z <= T::one()) {
            return Err(domain("z", z.as_f64(), "[0, 1]"));
        }
        let g = self.offspring.eval_unchecked(z);
        let h = self.immigration.eval_unchecked(z);
        let gi = match i32::try_from(i) {
            Ok(i) => g.powi(i),
            Err(_) => g.powf(T::from_u64_lossy(i)),
        };
        Ok(gi * h)
    }

    /// One transition from state `y`. Offspring are drawn before immigrants.
    pub fn step<R: Rng + ?Sized>(&self, y: u64, rng: &mut R) -> u64 {
        let offspring = self.offspring.sample_sum(y, rng);
        offspring.saturating_add(self.immigration.sample(rng))
    }

    /// `E y(n)` from `E y(n+1) = g'(1) E y(n) + h'(1)`.
    pub fn mean_after_n(&self, y0: u64, n: u64) -> T {
        let m = self.offspring.mean();
        let drift = self.immigration.mean();
        let mut mean = T::from_u64_lossy(y0);
        for _ in 0..n {
            mean = m * mean + drift;
        }
        mean
    }

    pub fn simulate_path(&self, y0: u64, n_steps: usize, seed: RngSeed) -> Result<DbiPath> {
        self.simulate_path_capped(y0, n_steps, seed, 1, 1_000_000_000)
    }

    /// Simulates `n_steps` transitions from `y0`. A state above `cap` aborts
    /// the run with [`Error::PopulationCap`] carrying the path so far.
    pub fn simulate_path_capped(
        &self,
        y0: u64,
        n_steps: usize,
        seed: RngSeed,
        scale: u64,
        cap: u64,
    ) -> Result<DbiPath> {
        let mut rng = seed.into_state();
        let mut states = Vec::with_capacity(n_steps + 1);
        states.push(y0);
        let mut y = y0;
        for step in 1..=n_steps {
            let next = self.step(y, &mut rng);
            if next > cap {
                return Err(Error::PopulationCap {
                    cap,
                    step,
                    truncated: Box::new(DbiPath { states, scale, seed }),
                });
            }
            states.push(next);
            y = next;
        }
        Ok(DbiPath { states, scale, seed })
    }
}

/// A realized trajectory `y(0..=n)` together with its lattice scale `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DbiPath {
    pub states: Vec<u64>,
    pub scale: u64,
    pub seed: RngSeed,
}

impl DbiPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> u64 {
        *self.states.last().expect("paths are nonempty")
    }

    /// The path on `E_k = {0, 1/k, 2/k, ...}`.
    pub fn scaled(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.scale as f64;
        self.states.iter().map(move |&y| y as f64 / k)
    }

    /// CSV with columns `step,state`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "state"])?;
        for (i, y) in self.states.iter().enumerate() {
            w.write_record([i.to_string(), y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
